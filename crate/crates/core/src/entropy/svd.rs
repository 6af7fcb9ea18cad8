use super::{check_series, EntropyError};

/// Singular values of the `(n-m+1) × m` delay-embedding matrix, descending.
///
/// One-sided Jacobi rotations on the lag columns; values below the
/// numerical-rank floor `σ_max · rows · ε` are reported as exactly zero.
pub fn singular_values(x: &[f64], m: usize) -> Vec<f64> {
    let rows = x.len() + 1 - m;
    let mut cols: Vec<Vec<f64>> = (0..m).map(|j| x[j..j + rows].to_vec()).collect();

    for _sweep in 0..60 {
        let mut rotated = false;
        for p in 0..m {
            for q in p + 1..m {
                let (alpha, beta, gamma) = cols[p]
                    .iter()
                    .zip(&cols[q])
                    .fold((0.0, 0.0, 0.0), |(a, b, g), (u, v)| (a + u * u, b + v * v, g + u * v));
                if gamma == 0.0 || gamma.abs() <= f64::EPSILON * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                let (left, right) = cols.split_at_mut(q);
                for (u, v) in left[p].iter_mut().zip(right[0].iter_mut()) {
                    let (a, b) = (*u, *v);
                    *u = c * a - s * b;
                    *v = s * a + c * b;
                }
            }
        }
        if !rotated {
            break;
        }
    }

    let mut sigma: Vec<f64> = cols
        .iter()
        .map(|c| c.iter().map(|v| v * v).sum::<f64>().sqrt())
        .collect();
    sigma.sort_by(|a, b| b.total_cmp(a));
    let floor = sigma[0] * rows as f64 * f64::EPSILON;
    for s in &mut sigma {
        if *s <= floor {
            *s = 0.0;
        }
    }
    sigma
}

/// Normalised Shannon entropy (bits / log2 m) of the singular-value spectrum
/// of the delay embedding.
pub fn svd_entropy(x: &[f64], m: usize) -> Result<f64, EntropyError> {
    if !(2..=10).contains(&m) {
        return Err(EntropyError::InvalidParameter(format!("SVDEn: m={m} outside 2..10")));
    }
    check_series(x, m + 1)?;
    let sigma = singular_values(x, m);
    let total: f64 = sigma.iter().sum();
    if total == 0.0 {
        return Err(EntropyError::Undefined("SVDEn of an all-zero series".into()));
    }
    let h: f64 = sigma
        .iter()
        .filter(|&&s| s > 0.0)
        .map(|s| {
            let p = s / total;
            -p * p.log2()
        })
        .fold(0.0, |h, t| h + t);
    Ok(h / (m as f64).log2())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_series_is_zero() {
        for m in 2..=10 {
            assert_eq!(svd_entropy(&[3.7; 200], m).unwrap(), 0.0);
        }
    }

    #[test]
    fn sinusoid_has_rank_two() {
        let x: Vec<f64> = (0..400).map(|i| (0.3 * i as f64).sin()).collect();
        let s = singular_values(&x, 5);
        assert!(s[2] / s[0] < 1e-6, "{s:?}");
    }

    #[test]
    fn rejects_bad_order() {
        assert!(svd_entropy(&[1.0, 2.0, 3.0], 1).is_err());
        assert!(svd_entropy(&[1.0, 2.0, 3.0], 11).is_err());
        assert!(svd_entropy(&[0.0; 50], 3).is_err());
    }
}
