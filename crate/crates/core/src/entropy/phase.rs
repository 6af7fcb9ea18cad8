use std::f64::consts::TAU;

use super::{check_series, shannon_bits, EntropyError};

/// Sector occupancy of the second-order difference plot: points
/// `(x[n+1]−x[n], x[n+2]−x[n+1])` binned into `k` equal angular sectors
/// starting at angle 0. Points at the origin count toward sector 0.
pub fn phase_sector_counts(x: &[f64], k: usize) -> Vec<usize> {
    let width = TAU / k as f64;
    let mut counts = vec![0usize; k];
    for w in x.windows(3) {
        let u = w[1] - w[0];
        let v = w[2] - w[1];
        let sector = if u == 0.0 && v == 0.0 {
            0
        } else {
            let mut angle = v.atan2(u);
            if angle < 0.0 {
                angle += TAU;
            }
            ((angle / width) as usize).min(k - 1)
        };
        counts[sector] += 1;
    }
    counts
}

/// Count-based phase entropy over `k` sectors, normalised by `log2 k`.
pub fn phase_entropy(x: &[f64], k: usize) -> Result<f64, EntropyError> {
    if !(2..=10).contains(&k) {
        return Err(EntropyError::InvalidParameter(format!("PhaseEn: K={k} outside 2..10")));
    }
    check_series(x, 3)?;
    let counts = phase_sector_counts(x, k);
    Ok(shannon_bits(counts, x.len() - 2) / (k as f64).log2())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ramp_is_zero() {
        let x: Vec<f64> = (0..200).map(f64::from).collect();
        for k in 2..=10 {
            assert_eq!(phase_entropy(&x, k).unwrap(), 0.0);
        }
    }

    #[test]
    fn origin_goes_to_first_sector() {
        assert_eq!(phase_sector_counts(&[1.0; 10], 4), vec![8, 0, 0, 0]);
    }

    #[test]
    fn quadrants() {
        // (1,1) → Q1, (1,-1) → Q4, (-1,-1) → Q3, (-1,1) → Q2
        let x = [0.0, 1.0, 2.0, 1.0, 0.0, 1.0];
        assert_eq!(phase_sector_counts(&x, 4), vec![1, 1, 1, 1]);
        assert_eq!(phase_entropy(&x, 4).unwrap(), 1.0);
    }

    #[test]
    fn too_short() {
        assert!(phase_entropy(&[1.0, 2.0], 4).is_err());
    }
}
