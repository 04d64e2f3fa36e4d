//! Comparison estimators: zero-attracting LMS, its reweighted variant, and a
//! batch LASSO solved by projected gradient onto the l1 ball.

use ndarray::{Array1, ArrayView1, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::linalg::{all_finite, dot, sgn};
use crate::projections::{project_weighted_l1_ball, WeightedL1Ball};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LmsConfig {
    /// Step size.
    pub mu: f64,
    /// Zero-attractor strength.
    pub rho: f64,
    /// `1 / eta` of the log-sum penalty `sum_i log(1 + |h_i| / eta)`; only
    /// used by the reweighted variant.
    #[serde(default = "default_eta_inv")]
    pub eta_inv: f64,
}

fn default_eta_inv() -> f64 {
    10.0
}

impl LmsConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.mu > 0.0) || !self.mu.is_finite() {
            return Err(Error::invalid("mu", format!("must be finite and > 0, got {}", self.mu)));
        }
        if !(self.rho >= 0.0) || !self.rho.is_finite() {
            return Err(Error::invalid("rho", format!("must be finite and >= 0, got {}", self.rho)));
        }
        if !(self.eta_inv >= 0.0) || !self.eta_inv.is_finite() {
            return Err(Error::invalid("eta_inv", format!("must be finite and >= 0, got {}", self.eta_inv)));
        }
        Ok(())
    }
}

fn lms_error(h: &[f64], x: &[f64], y: f64) -> Result<f64> {
    check_dim(h.len(), x.len())?;
    Ok(y - dot(h, x))
}

/// ZA-LMS: `h + mu (y - h·x) x - rho sgn(h)`.
pub fn zalms_step(h: &[f64], x: &[f64], y: f64, cfg: &LmsConfig) -> Result<Vec<f64>> {
    let e = lms_error(h, x, y)?;
    Ok(h.iter()
        .zip(x)
        .map(|(&hi, &xi)| hi + cfg.mu * e * xi - cfg.rho * sgn(hi))
        .collect())
}

/// RZA-LMS: the zero attractor is scaled by `1 / (1 + eta_inv |h_i|)` so
/// large coefficients are barely shrunk.
pub fn rzalms_step(h: &[f64], x: &[f64], y: f64, cfg: &LmsConfig) -> Result<Vec<f64>> {
    let e = lms_error(h, x, y)?;
    Ok(h.iter()
        .zip(x)
        .map(|(&hi, &xi)| hi + cfg.mu * e * xi - cfg.rho * sgn(hi) / (1.0 + cfg.eta_inv * hi.abs()))
        .collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct LassoSolution {
    pub h: Vec<f64>,
    /// `||X h - y||^2` of every accepted iterate, starting with the initial point.
    pub objective: Vec<f64>,
    pub iterations: usize,
}

/// Approximate minimiser of `||X h - y||^2` subject to `||h||_1 <= delta`.
pub fn lasso_solve(
    x: ArrayView2<f64>,
    y: ArrayView1<f64>,
    delta: f64,
    max_iter: usize,
    tol: f64,
) -> Result<Vec<f64>> {
    lasso_solve_from(x, y, delta, None, max_iter, tol).map(|s| s.h)
}

/// Projected gradient for the constrained LASSO, optionally warm-started.
///
/// The step is `1 / ||X||_op^2` with the operator norm estimated by power
/// iteration. A step that increases the objective is rejected and the step
/// halved, so the recorded objective never increases. Stops when the
/// relative decrease drops below `tol` or after `max_iter` iterations.
pub fn lasso_solve_from(
    x: ArrayView2<f64>,
    y: ArrayView1<f64>,
    delta: f64,
    start: Option<&[f64]>,
    max_iter: usize,
    tol: f64,
) -> Result<LassoSolution> {
    let (rows, cols) = x.dim();
    if rows == 0 || cols == 0 {
        return Err(Error::Empty("design matrix"));
    }
    check_dim(rows, y.len())?;
    if !x.iter().all(|v| v.is_finite()) || !y.iter().all(|v| v.is_finite()) {
        return Err(Error::NonFinite("lasso data"));
    }
    let ball = WeightedL1Ball::unweighted(cols, delta)?;

    let mut h = match start {
        Some(s) => {
            check_dim(cols, s.len())?;
            project_weighted_l1_ball(s, &ball)?
        }
        None => vec![0.0; cols],
    };
    let objective = |h: &[f64]| -> (f64, Array1<f64>) {
        let r = x.dot(&ArrayView1::from(h)) - y;
        (r.dot(&r), r)
    };

    let lipschitz = operator_norm_sq(x);
    if lipschitz == 0.0 {
        let (f, _) = objective(&h);
        return Ok(LassoSolution { h, objective: vec![f], iterations: 0 });
    }
    let mut step = 1.0 / lipschitz;
    let (mut f, mut r) = objective(&h);
    let mut trace = vec![f];
    let mut iterations = 0;
    while iterations < max_iter && f > 0.0 {
        iterations += 1;
        let grad = x.t().dot(&r);
        let trial: Vec<f64> = h.iter().zip(grad.iter()).map(|(hi, gi)| hi - step * gi).collect();
        let next = project_weighted_l1_ball(&trial, &ball)?;
        let (f_next, r_next) = objective(&next);
        if !f_next.is_finite() {
            return Err(Error::NonFinite("lasso objective"));
        }
        if f_next > f {
            step *= 0.5;
            if step < 1e-30 / lipschitz {
                break;
            }
            continue;
        }
        let decrease = (f - f_next) / f.max(f64::MIN_POSITIVE);
        h = next;
        f = f_next;
        r = r_next;
        trace.push(f);
        if decrease < tol {
            break;
        }
    }
    debug_assert!(all_finite(&h));
    Ok(LassoSolution {
        h,
        objective: trace,
        iterations,
    })
}

/// Power-iteration estimate of the largest eigenvalue of `X^T X`, inflated
/// slightly since the iteration approaches it from below.
fn operator_norm_sq(x: ArrayView2<f64>) -> f64 {
    let cols = x.ncols();
    let mut v = Array1::from_elem(cols, 1.0 / (cols as f64).sqrt());
    let mut lambda = 0.0;
    for _ in 0..200 {
        let xv = x.dot(&v);
        let w = x.t().dot(&xv);
        let norm = w.dot(&w).sqrt();
        if norm == 0.0 {
            return 0.0;
        }
        let next = norm;
        v = w / norm;
        if (next - lambda).abs() <= 1e-10 * next {
            lambda = next;
            break;
        }
        lambda = next;
    }
    lambda * 1.01
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{Array1, Array2};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn cfg(mu: f64, rho: f64, eta_inv: f64) -> LmsConfig {
        LmsConfig { mu, rho, eta_inv }
    }

    #[test]
    fn zalms_examples() {
        let h = zalms_step(&[0.0, 0.0], &[1.0, 0.0], 1.0, &cfg(0.5, 0.0, 0.0)).unwrap();
        assert_eq!(h, vec![0.5, 0.0]);
        let h = zalms_step(&[0.5, 0.0], &[1.0, 0.0], 0.5, &cfg(1e-300, 0.1, 0.0)).unwrap();
        assert!((h[0] - 0.4).abs() < 1e-15);
        assert_eq!(h[1], 0.0);
        assert!(zalms_step(&[0.0], &[1.0, 2.0], 0.0, &cfg(0.1, 0.0, 0.0)).is_err());
    }

    /// Central finite difference of `f` at `h` along coordinate `i`.
    fn partial(f: impl Fn(&[f64]) -> f64, h: &[f64], i: usize) -> f64 {
        let step = 1e-6;
        let mut a = h.to_vec();
        let mut b = h.to_vec();
        a[i] += step;
        b[i] -= step;
        (f(&a) - f(&b)) / (2.0 * step)
    }

    #[test]
    fn zalms_is_a_subgradient_step() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let h: Vec<f64> = (0..6).map(|_| StandardNormal.sample(&mut rng)).collect();
        let x: Vec<f64> = (0..6).map(|_| StandardNormal.sample(&mut rng)).collect();
        let y = 0.7;
        let c = cfg(0.03, 0.002, 0.0);
        let gamma = c.rho / c.mu;
        // theta = 1/2 (y - h·x)^2 + gamma ||h||_1, differentiable away from h_i = 0
        let theta = |v: &[f64]| 0.5 * (y - dot(v, &x)).powi(2) + gamma * v.iter().map(|t| t.abs()).sum::<f64>();
        let next = zalms_step(&h, &x, y, &c).unwrap();
        for i in 0..6 {
            let expected = h[i] - c.mu * partial(theta, &h, i);
            assert!((next[i] - expected).abs() < 1e-8);
        }
    }

    #[test]
    fn rzalms_matches_log_penalty_gradient() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let h: Vec<f64> = (0..6).map(|_| StandardNormal.sample(&mut rng)).collect();
        let x: Vec<f64> = (0..6).map(|_| StandardNormal.sample(&mut rng)).collect();
        let y = -0.3;
        let c = cfg(0.02, 0.004, 8.0);
        let eta = 1.0 / c.eta_inv;
        // d/dh log(1 + |h|/eta) = eta_inv sgn(h) / (1 + eta_inv |h|): rho = gamma mu eta_inv
        let gamma = c.rho / (c.mu * c.eta_inv);
        let theta = |v: &[f64]| {
            0.5 * (y - dot(v, &x)).powi(2) + gamma * v.iter().map(|t| (1.0 + t.abs() / eta).ln()).sum::<f64>()
        };
        let next = rzalms_step(&h, &x, y, &c).unwrap();
        for i in 0..6 {
            let expected = h[i] - c.mu * partial(theta, &h, i);
            assert!((next[i] - expected).abs() < 1e-8, "{i}");
        }
    }

    #[test]
    fn rzalms_limits() {
        let h = [0.3, -2.0, 0.0];
        let x = [0.4, 0.1, -1.0];
        let za = zalms_step(&h, &x, 0.2, &cfg(0.1, 0.01, 0.0)).unwrap();
        let rza = rzalms_step(&h, &x, 0.2, &cfg(0.1, 0.01, 0.0)).unwrap();
        assert_eq!(za, rza);
        let lms = zalms_step(&[1e6], &[0.0], 0.0, &cfg(0.1, 0.0, 0.0)).unwrap();
        let big = rzalms_step(&[1e6], &[0.0], 0.0, &cfg(0.1, 0.01, 10.0)).unwrap();
        assert!((big[0] - lms[0]).abs() < 1e-8);
    }

    #[test]
    fn lasso_identity_design() {
        let x = Array2::<f64>::eye(4);
        let y = Array1::from(vec![0.5, -0.25, 0.1, 0.0]);
        let h = lasso_solve(x.view(), y.view(), 2.0, 1000, 1e-15).unwrap();
        for (a, b) in h.iter().zip(y.iter()) {
            assert!((a - b).abs() < 1e-12);
        }
        let y = Array1::from(vec![2.0, -1.0, 0.5, 0.0]);
        let h = lasso_solve(x.view(), y.view(), 1.5, 1000, 1e-15).unwrap();
        let expected = project_weighted_l1_ball(y.as_slice().unwrap(), &WeightedL1Ball::unweighted(4, 1.5).unwrap())
            .unwrap();
        for (a, b) in h.iter().zip(&expected) {
            assert!((a - b).abs() < 1e-9, "{h:?} vs {expected:?}");
        }
    }

    #[test]
    fn lasso_iterates_stay_feasible_and_descend() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let x = Array2::from_shape_fn((20, 50), |_| StandardNormal.sample(&mut rng));
        let y = Array1::from_shape_fn(20, |_| StandardNormal.sample(&mut rng));
        let sol = lasso_solve_from(x.view(), y.view(), 1.5, None, 5000, 0.0).unwrap();
        assert!(sol.h.iter().map(|v| v.abs()).sum::<f64>() <= 1.5 * (1.0 + 1e-12));
        for pair in sol.objective.windows(2) {
            assert!(pair[1] <= pair[0] + 1e-10);
        }
    }

    #[test]
    fn lasso_rejects_bad_input() {
        let x = Array2::<f64>::eye(2);
        let y = Array1::from(vec![f64::NAN, 0.0]);
        assert!(lasso_solve(x.view(), y.view(), 1.0, 10, 0.0).is_err());
        let y = Array1::from(vec![1.0, 0.0]);
        assert!(lasso_solve(x.view(), y.view(), 0.0, 10, 0.0).is_err());
        let y3 = Array1::from(vec![1.0, 0.0, 0.0]);
        assert!(lasso_solve(x.view(), y3.view(), 1.0, 10, 0.0).is_err());
    }
}
