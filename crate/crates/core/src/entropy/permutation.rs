use super::{check_series, shannon_bits, EntropyError};

/// Lehmer rank of the stable argsort of `w` (ties: earlier index first).
fn pattern_code(w: &[f64], order: &mut [usize]) -> u32 {
    for (i, o) in order.iter_mut().enumerate() {
        *o = i;
    }
    order.sort_by(|&a, &b| w[a].total_cmp(&w[b]).then(a.cmp(&b)));
    let m = order.len();
    let mut code = 0u32;
    for i in 0..m {
        let smaller_after = order[i + 1..].iter().filter(|&&v| v < order[i]).count() as u32;
        code = code * (m - i) as u32 + smaller_after;
    }
    code
}

/// Permutation entropy of order `m`, normalised by `log2(m!)`.
pub fn perm_entropy(x: &[f64], m: usize) -> Result<f64, EntropyError> {
    if !(2..=10).contains(&m) {
        return Err(EntropyError::InvalidParameter(format!("PermEn: m={m} outside 2..10")));
    }
    check_series(x, m + 1)?;
    let mut order = vec![0usize; m];
    let mut codes: Vec<u32> = x.windows(m).map(|w| pattern_code(w, &mut order)).collect();
    codes.sort_unstable();
    let total = codes.len();
    let counts = codes.chunk_by(|a, b| a == b).map(<[u32]>::len);
    let h = shannon_bits(counts, total);
    let log_fact: f64 = (2..=m).map(|k| (k as f64).log2()).sum();
    Ok(h / log_fact)
}
