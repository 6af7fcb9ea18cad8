use super::{check_series, pop_std, EntropyError};

/// Counts `(B, A)`: pairs `i < j` among the first `n - m` template starts
/// whose length-`m` (resp. `m + 1`) templates lie within Chebyshev distance
/// `tol`.
pub fn template_match_counts(x: &[f64], m: usize, tol: f64) -> (u64, u64) {
    let starts = x.len() - m;
    let (mut b, mut a) = (0u64, 0u64);
    for i in 0..starts {
        let xi = &x[i..i + m + 1];
        for j in i + 1..starts {
            let xj = &x[j..j + m + 1];
            if xi[..m].iter().zip(&xj[..m]).all(|(p, q)| (p - q).abs() <= tol) {
                b += 1;
                if (xi[m] - xj[m]).abs() <= tol {
                    a += 1;
                }
            }
        }
    }
    (b, a)
}

/// Sample entropy `-ln(A/B)` with tolerance `r · std(x)`; self-matches
/// excluded.
pub fn sample_entropy(x: &[f64], m: usize, r: f64) -> Result<f64, EntropyError> {
    if !(1..=3).contains(&m) {
        return Err(EntropyError::InvalidParameter(format!("SampEn: m={m} outside 1..3")));
    }
    if !(0.05 - 1e-12..=0.5 + 1e-12).contains(&r) {
        return Err(EntropyError::InvalidParameter(format!("SampEn: r={r} outside [0.05, 0.5]")));
    }
    check_series(x, m + 2)?;
    let tol = r * pop_std(x);
    let (b, a) = template_match_counts(x, m, tol);
    if b == 0 || a == 0 {
        return Err(EntropyError::Undefined(format!("SampEn with A={a}, B={b}")));
    }
    Ok((b as f64 / a as f64).ln())
}
