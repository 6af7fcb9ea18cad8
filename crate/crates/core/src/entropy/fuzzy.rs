use super::{check_series, pop_std, EntropyError};

/// Beyond this exponent `exp(-z)` is exactly 0.0 in f64.
const EXP_ZERO: f64 = 746.0;

fn membership(d: f64, r2: u32, tol: f64) -> f64 {
    if d == 0.0 {
        1.0
    } else if tol == 0.0 {
        0.0
    } else {
        (-d.powi(r2 as i32) / tol).exp()
    }
}

/// Mean pairwise membership over ordered pairs `i ≠ j` of the `count`
/// mean-removed templates of length `len`.
fn similarity(x: &[f64], len: usize, count: usize, r2: u32, tol: f64) -> f64 {
    if len == 1 {
        // single-sample templates vanish after mean removal
        return 1.0;
    }
    let mut t = Vec::with_capacity(count * len);
    for i in 0..count {
        let w = &x[i..i + len];
        let mean = w.iter().sum::<f64>() / len as f64;
        t.extend(w.iter().map(|v| v - mean));
    }
    // sort by first coordinate so the scan can stop once that coordinate
    // alone drives the membership to zero
    let mut order: Vec<usize> = (0..count).collect();
    order.sort_by(|&a, &b| t[a * len].total_cmp(&t[b * len]).then(a.cmp(&b)));
    let sorted: Vec<f64> = order
        .iter()
        .flat_map(|&i| t[i * len..(i + 1) * len].iter().copied())
        .collect();

    let mut sum = 0.0;
    for i in 0..count {
        let ti = &sorted[i * len..(i + 1) * len];
        let mut row = 0.0;
        for j in i + 1..count {
            let tj = &sorted[j * len..(j + 1) * len];
            let lead = tj[0] - ti[0];
            if lead > 0.0 && (tol == 0.0 || lead.powi(r2 as i32) / tol > EXP_ZERO) {
                break;
            }
            let d = ti
                .iter()
                .zip(tj)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            row += membership(d, r2, tol);
        }
        sum += row;
    }
    2.0 * sum / (count as f64 * (count as f64 - 1.0))
}

/// Fuzzy entropy `ln φ_m − ln φ_{m+1}` with membership
/// `exp(−d^{r2} / (r · std))` on mean-removed templates.
///
/// Both template lengths use the same `n − m` starting points. The
/// membership is not scale-free for `r2 > 1`: amplitudes enter through
/// `d^{r2}` but the tolerance only linearly.
pub fn fuzzy_entropy(x: &[f64], m: usize, r: f64, r2: u32) -> Result<f64, EntropyError> {
    if !(1..=2).contains(&m) {
        return Err(EntropyError::InvalidParameter(format!("FuzzyEn: m={m} outside 1..2")));
    }
    if !(0.05 - 1e-12..=0.5 + 1e-12).contains(&r) {
        return Err(EntropyError::InvalidParameter(format!("FuzzyEn: r={r} outside [0.05, 0.5]")));
    }
    if !(1..=5).contains(&r2) {
        return Err(EntropyError::InvalidParameter(format!("FuzzyEn: r2={r2} outside 1..5")));
    }
    check_series(x, m + 2)?;
    let tol = r * pop_std(x);
    let count = x.len() - m;
    let phi_m = similarity(x, m, count, r2, tol);
    let phi_m1 = similarity(x, m + 1, count, r2, tol);
    if phi_m == 0.0 || phi_m1 == 0.0 {
        return Err(EntropyError::Underflow);
    }
    Ok(phi_m.ln() - phi_m1.ln())
}
