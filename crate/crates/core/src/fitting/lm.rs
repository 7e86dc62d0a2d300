//! Box-constrained Levenberg-Marquardt with finite-difference Jacobians.

use nalgebra::{DMatrix, DVector};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LmOptions {
    pub max_iter: usize,
    /// Relative step tolerance.
    pub xtol: f64,
    /// Relative cost-change tolerance.
    pub ftol: f64,
}

impl Default for LmOptions {
    fn default() -> Self {
        LmOptions {
            max_iter: 500,
            xtol: 1e-9,
            ftol: 1e-12,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LmOutcome {
    pub x: Vec<f64>,
    /// Half the residual sum of squares.
    pub cost: f64,
    pub iterations: usize,
    pub converged: bool,
}

const LAMBDA_INIT: f64 = 1e-3;
const LAMBDA_MAX: f64 = 1e20;

/// Minimizes 0.5 * |r(x)|^2 over lo <= x <= hi starting at `x0`.
///
/// `residuals` returns `None` where the model cannot be evaluated; such
/// points are treated as infinitely costly. Coordinates with lo == hi are
/// held fixed. Returns `None` if the start point itself cannot be evaluated.
pub fn minimize<F>(residuals: F, x0: &[f64], lo: &[f64], hi: &[f64], opts: &LmOptions) -> Option<LmOutcome>
where
    F: Fn(&[f64]) -> Option<Vec<f64>>,
{
    let free: Vec<usize> = (0..x0.len()).filter(|&i| lo[i] < hi[i]).collect();
    let mut x: Vec<f64> = x0.iter().zip(lo.iter().zip(hi)).map(|(&v, (&l, &h))| v.clamp(l, h)).collect();
    let mut r = residuals(&x)?;
    let mut cost = half_sq(&r);
    if !cost.is_finite() {
        return None;
    }
    if free.is_empty() || cost == 0.0 {
        return Some(LmOutcome { x, cost, iterations: 0, converged: true });
    }

    let mut lambda = LAMBDA_INIT;
    for iter in 1..=opts.max_iter {
        let jac = match jacobian(&residuals, &x, &r, &free, lo, hi) {
            Some(j) => j,
            None => return Some(LmOutcome { x, cost, iterations: iter, converged: false }),
        };
        let rv = DVector::from_column_slice(&r);
        let jt = jac.transpose();
        let a = &jt * &jac;
        let grad = &jt * &rv;
        let diag_max = (0..free.len()).map(|i| a[(i, i)]).fold(0.0f64, f64::max);
        if diag_max == 0.0 {
            return Some(LmOutcome { x, cost, iterations: iter, converged: true });
        }

        loop {
            let mut damped = a.clone();
            for i in 0..free.len() {
                damped[(i, i)] += lambda * a[(i, i)].max(1e-12 * diag_max);
            }
            let step = match damped.cholesky() {
                Some(ch) => ch.solve(&(-&grad)),
                None => {
                    lambda *= 10.0;
                    if lambda > LAMBDA_MAX {
                        return Some(LmOutcome { x, cost, iterations: iter, converged: false });
                    }
                    continue;
                }
            };
            let mut x_new = x.clone();
            for (k, &i) in free.iter().enumerate() {
                x_new[i] = (x[i] + step[k]).clamp(lo[i], hi[i]);
            }
            let step_norm = free.iter().map(|&i| (x_new[i] - x[i]).powi(2)).sum::<f64>().sqrt();
            let x_norm = free.iter().map(|&i| x[i] * x[i]).sum::<f64>().sqrt();
            if step_norm <= opts.xtol * (x_norm + opts.xtol) {
                return Some(LmOutcome { x, cost, iterations: iter, converged: true });
            }
            let trial = residuals(&x_new).map(|rn| {
                let c = half_sq(&rn);
                (rn, c)
            });
            match trial {
                Some((rn, c)) if c.is_finite() && c < cost => {
                    let rel = (cost - c) / cost;
                    x = x_new;
                    r = rn;
                    cost = c;
                    lambda = (lambda / 10.0).max(1e-15);
                    if rel < opts.ftol || cost == 0.0 {
                        return Some(LmOutcome { x, cost, iterations: iter, converged: true });
                    }
                    break;
                }
                _ => {
                    lambda *= 10.0;
                    if lambda > LAMBDA_MAX {
                        return Some(LmOutcome { x, cost, iterations: iter, converged: false });
                    }
                }
            }
        }
    }
    Some(LmOutcome { x, cost, iterations: opts.max_iter, converged: false })
}

fn half_sq(r: &[f64]) -> f64 {
    0.5 * r.iter().map(|v| v * v).sum::<f64>()
}

/// Central differences where both sides are inside the box and evaluable,
/// one-sided otherwise.
fn jacobian<F>(residuals: &F, x: &[f64], r0: &[f64], free: &[usize], lo: &[f64], hi: &[f64]) -> Option<DMatrix<f64>>
where
    F: Fn(&[f64]) -> Option<Vec<f64>>,
{
    let mut jac = DMatrix::zeros(r0.len(), free.len());
    for (k, &i) in free.iter().enumerate() {
        let h = 1e-6 * x[i].abs().max(1.0);
        let mut xp = x.to_vec();
        let mut xm = x.to_vec();
        xp[i] = x[i] + h;
        xm[i] = x[i] - h;
        let rp = if xp[i] <= hi[i] { residuals(&xp) } else { None };
        let rm = if xm[i] >= lo[i] { residuals(&xm) } else { None };
        let col: Vec<f64> = match (rp, rm) {
            (Some(p), Some(m)) => p.iter().zip(&m).map(|(a, b)| (a - b) / (2.0 * h)).collect(),
            (Some(p), None) => p.iter().zip(r0).map(|(a, b)| (a - b) / h).collect(),
            (None, Some(m)) => r0.iter().zip(&m).map(|(a, b)| (a - b) / h).collect(),
            (None, None) => return None,
        };
        for (row, v) in col.into_iter().enumerate() {
            jac[(row, k)] = v;
        }
    }
    Some(jac)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_rosenbrock() {
        let f = |x: &[f64]| Some(vec![10.0 * (x[1] - x[0] * x[0]), 1.0 - x[0]]);
        let out = minimize(f, &[-1.2, 1.0], &[-5.0, -5.0], &[5.0, 5.0], &LmOptions::default()).unwrap();
        assert!(out.converged);
        assert!((out.x[0] - 1.0).abs() < 1e-6 && (out.x[1] - 1.0).abs() < 1e-6);
    }

    #[test]
    fn respects_bounds() {
        // Unconstrained optimum at x = 3, box caps it at 2.
        let f = |x: &[f64]| Some(vec![x[0] - 3.0]);
        let out = minimize(f, &[0.0], &[-1.0], &[2.0], &LmOptions::default()).unwrap();
        assert_eq!(out.x[0], 2.0);
        assert!(out.converged);
    }

    #[test]
    fn pinned_coordinates_stay_fixed() {
        let f = |x: &[f64]| Some(vec![x[0] - 1.0, x[1] - 4.0]);
        let out = minimize(f, &[0.0, 7.0], &[-9.0, 7.0], &[9.0, 7.0], &LmOptions::default()).unwrap();
        assert_eq!(out.x[1], 7.0);
        assert!((out.x[0] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn unevaluable_start_is_rejected() {
        let f = |_: &[f64]| None;
        assert!(minimize(f, &[0.0], &[-1.0], &[1.0], &LmOptions::default()).is_none());
    }

    #[test]
    fn iteration_cap_reports_not_converged() {
        let f = |x: &[f64]| Some(vec![10.0 * (x[1] - x[0] * x[0]), 1.0 - x[0]]);
        let opts = LmOptions { max_iter: 2, ..Default::default() };
        let out = minimize(f, &[-1.2, 1.0], &[-5.0, -5.0], &[5.0, 5.0], &opts).unwrap();
        assert!(!out.converged);
        assert_eq!(out.iterations, 2);
    }
}
