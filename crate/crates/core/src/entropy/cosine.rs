use std::f64::consts::PI;

use super::{check_series, EntropyError};

/// Fraction of embedding-vector pairs `i < j` whose angular distance
/// `acos(cos θ)/π` is strictly below `r`.
pub fn cosine_similarity_probability(x: &[f64], m: usize, r: f64) -> Result<f64, EntropyError> {
    let rows = x.len() + 1 - m;
    let norms: Vec<f64> = (0..rows)
        .map(|i| x[i..i + m].iter().map(|v| v * v).sum::<f64>().sqrt())
        .collect();
    if let Some(i) = norms.iter().position(|&n| n == 0.0) {
        return Err(EntropyError::DegenerateVector(i));
    }
    // acos is decreasing: distance < r  ⇔  cos θ > cos(rπ)
    let threshold = (r * PI).cos();
    let mut hits = 0u64;
    for i in 0..rows {
        let xi = &x[i..i + m];
        for j in i + 1..rows {
            let dot: f64 = xi.iter().zip(&x[j..j + m]).map(|(a, b)| a * b).sum();
            let cos = (dot / (norms[i] * norms[j])).clamp(-1.0, 1.0);
            if cos > threshold {
                hits += 1;
            }
        }
    }
    let pairs = (rows as u64) * (rows as u64 - 1) / 2;
    Ok(hits as f64 / pairs as f64)
}

/// Binary Shannon entropy (bits) of the global angular-similarity
/// probability. Sensitive to offsets, since angles are taken about zero.
pub fn cosine_similarity_entropy(x: &[f64], m: usize, r: f64) -> Result<f64, EntropyError> {
    if !(2..=3).contains(&m) {
        return Err(EntropyError::InvalidParameter(format!("CoSiEn: m={m} outside 2..3")));
    }
    if !(r > 0.0 && r <= 0.5 + 1e-12) {
        return Err(EntropyError::InvalidParameter(format!("CoSiEn: r={r} outside (0, 0.5]")));
    }
    check_series(x, m + 1)?;
    let p = cosine_similarity_probability(x, m, r)?;
    let h = |p: f64| if p > 0.0 { -p * p.log2() } else { 0.0 };
    Ok(h(p) + h(1.0 - p))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn positive_constant_is_zero() {
        assert_eq!(cosine_similarity_entropy(&[4.0; 200], 2, 0.1).unwrap(), 0.0);
        assert_eq!(cosine_similarity_entropy(&[4.0; 200], 3, 0.05).unwrap(), 0.0);
    }

    #[test]
    fn zero_vector_is_an_error() {
        let mut x = vec![1.0; 30];
        x[10] = 0.0;
        x[11] = 0.0;
        assert_eq!(
            cosine_similarity_entropy(&x, 2, 0.1),
            Err(EntropyError::DegenerateVector(10))
        );
    }

    #[test]
    fn identical_pairs_only() {
        // vectors (1,1),(1,1),(1,-1),(-1,1),(1,-1),(-1,1); only the identical
        // pairs (0,1), (2,4), (3,5) fall inside the tolerance
        let x = [1.0, 1.0, 1.0, -1.0, 1.0, -1.0, 1.0];
        let p = cosine_similarity_probability(&x, 2, 0.25).unwrap();
        assert_eq!(p, 3.0 / 15.0);
    }

    #[test]
    fn half_similar_gives_one_bit() {
        // three parallel vectors and one orthogonal: 3 of 6 pairs similar
        let x = [1.0, 1.0, 1.0, 1.0, -1.0];
        assert_eq!(cosine_similarity_probability(&x, 2, 0.1).unwrap(), 0.5);
        assert_eq!(cosine_similarity_entropy(&x, 2, 0.1).unwrap(), 1.0);
    }
}
