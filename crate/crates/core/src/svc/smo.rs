//! Dual soft-margin solver on a precomputed kernel: sequential minimal
//! optimization with second-order working-set selection.
//!
//! Minimizes `½ αᵀQα − eᵀα` subject to `0 ≤ α ≤ C`, `yᵀα = 0`, where
//! `Q_ij = y_i y_j K_ij`. The decision function is
//! `f(x) = Σ α_i y_i K(x_i, x) − ρ`.

use super::SvcError;

const TAU: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct DualSolution {
    pub alpha: Vec<f64>,
    pub rho: f64,
    pub iterations: usize,
    /// `m(α) − M(α)` at termination: the maximal KKT violation.
    pub kkt_gap: f64,
}

/// `kernel` is row-major `n × n`; `y` holds ±1.
pub fn solve_dual(
    kernel: &[f64],
    y: &[f64],
    c: f64,
    tolerance: f64,
    max_iter: usize,
) -> Result<DualSolution, SvcError> {
    let n = y.len();
    debug_assert_eq!(kernel.len(), n * n);
    let k = |i: usize, j: usize| kernel[i * n + j];
    let mut alpha = vec![0.0; n];
    let mut grad = vec![-1.0; n];

    let up = |a: f64, yi: f64| (yi > 0.0 && a < c) || (yi < 0.0 && a > 0.0);
    let low = |a: f64, yi: f64| (yi > 0.0 && a > 0.0) || (yi < 0.0 && a < c);

    let mut iterations = 0;
    let gap = loop {
        let mut gmax = f64::NEG_INFINITY;
        let mut i_sel = usize::MAX;
        for t in 0..n {
            if up(alpha[t], y[t]) {
                let v = -y[t] * grad[t];
                if v > gmax {
                    gmax = v;
                    i_sel = t;
                }
            }
        }
        let mut gmax2 = f64::NEG_INFINITY;
        let mut j_sel = usize::MAX;
        let mut best = f64::INFINITY;
        for t in 0..n {
            if !low(alpha[t], y[t]) {
                continue;
            }
            let v = y[t] * grad[t];
            if v > gmax2 {
                gmax2 = v;
            }
            if i_sel == usize::MAX {
                continue;
            }
            let diff = gmax + v;
            if diff > 0.0 {
                let mut quad = k(i_sel, i_sel) + k(t, t) - 2.0 * k(i_sel, t);
                if quad <= 0.0 {
                    quad = TAU;
                }
                let obj = -diff * diff / quad;
                if obj < best {
                    best = obj;
                    j_sel = t;
                }
            }
        }
        let gap = gmax + gmax2;
        if gap < tolerance || j_sel == usize::MAX {
            break gap.max(0.0);
        }
        if iterations >= max_iter {
            return Err(SvcError::NonConvergence { iterations, gap });
        }
        iterations += 1;

        let (i, j) = (i_sel, j_sel);
        let (old_i, old_j) = (alpha[i], alpha[j]);
        let mut quad = k(i, i) + k(j, j) - 2.0 * k(i, j);
        if quad <= 0.0 {
            quad = TAU;
        }
        if y[i] != y[j] {
            let delta = (-grad[i] - grad[j]) / quad;
            let diff = alpha[i] - alpha[j];
            alpha[i] += delta;
            alpha[j] += delta;
            if diff > 0.0 {
                if alpha[j] < 0.0 {
                    alpha[j] = 0.0;
                    alpha[i] = diff;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = -diff;
            }
            if diff > 0.0 {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = c - diff;
                }
            } else if alpha[j] > c {
                alpha[j] = c;
                alpha[i] = c + diff;
            }
        } else {
            let delta = (grad[i] - grad[j]) / quad;
            let sum = alpha[i] + alpha[j];
            alpha[i] -= delta;
            alpha[j] += delta;
            if sum > c {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = sum - c;
                }
            } else if alpha[j] < 0.0 {
                alpha[j] = 0.0;
                alpha[i] = sum;
            }
            if sum > c {
                if alpha[j] > c {
                    alpha[j] = c;
                    alpha[i] = sum - c;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = sum;
            }
        }
        let (di, dj) = (alpha[i] - old_i, alpha[j] - old_j);
        for t in 0..n {
            grad[t] += y[t] * (y[i] * k(t, i) * di + y[j] * k(t, j) * dj);
        }
    };

    // bias from free vectors, else the midpoint of the feasible interval
    let (mut ub, mut lb) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut n_free, mut sum_free) = (0usize, 0.0);
    for t in 0..n {
        let yg = y[t] * grad[t];
        if alpha[t] >= c {
            if y[t] < 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else if alpha[t] <= 0.0 {
            if y[t] > 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else {
            n_free += 1;
            sum_free += yg;
        }
    }
    let rho = if n_free > 0 {
        sum_free / n_free as f64
    } else {
        (ub + lb) / 2.0
    };
    Ok(DualSolution {
        alpha,
        rho,
        iterations,
        kkt_gap: gap,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rbf(points: &[f64], gamma: f64) -> Vec<f64> {
        let n = points.len();
        let mut k = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                let d = points[i] - points[j];
                k[i * n + j] = (-gamma * d * d).exp();
            }
        }
        k
    }

    #[test]
    fn two_points_are_symmetric() {
        let k = rbf(&[-1.0, 1.0], 0.5);
        let sol = solve_dual(&k, &[1.0, -1.0], 10.0, 1e-6, 1000).unwrap();
        assert!((sol.alpha[0] - sol.alpha[1]).abs() < 1e-12);
        assert!(sol.rho.abs() < 1e-9);
        // closed form: α = 1 / (1 − K12)
        let expected = 1.0 / (1.0 - (-2.0f64).exp());
        assert!((sol.alpha[0] - expected).abs() < 1e-9);
    }

    #[test]
    fn box_and_equality_constraints() {
        let xs: Vec<f64> = (0..30).map(|i| ((i * 37) % 17) as f64 / 4.0).collect();
        let y: Vec<f64> = (0..30).map(|i| if (i * 7) % 3 == 0 { 1.0 } else { -1.0 }).collect();
        let k = rbf(&xs, 0.8);
        let c = 2.0;
        let sol = solve_dual(&k, &y, c, 1e-3, 100_000).unwrap();
        assert!(sol.alpha.iter().all(|&a| (0.0..=c).contains(&a)));
        let s: f64 = sol.alpha.iter().zip(&y).map(|(a, y)| a * y).sum();
        assert!(s.abs() < 1e-9);
        assert!(sol.kkt_gap < 1e-3);
    }

    #[test]
    fn iteration_cap_is_reported() {
        let xs: Vec<f64> = (0..40).map(|i| (i as f64 * 1.7).sin()).collect();
        let y: Vec<f64> = (0..40).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 }).collect();
        let k = rbf(&xs, 5.0);
        let err = solve_dual(&k, &y, 100.0, 1e-9, 1).unwrap_err();
        assert!(matches!(err, SvcError::NonConvergence { iterations: 1, .. }));
    }
}
