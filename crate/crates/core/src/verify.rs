//! Independent oracles and run checkers for the convergence guarantees.
//!
//! The brute-force projection here shares no code with the sorting
//! projection in [`crate::projections`]; it enumerates every candidate
//! support instead.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::datagen::{Amplitude, MeasurementStream, ScenarioKind, ScenarioSpec};
use crate::error::{check_dim, Error, Result};
use crate::filter::{FilterConfig, FilterState, Weighting};
use crate::linalg::{dist, dot, l1_norm};
use crate::projections::{project_weighted_l1_ball, Hyperslab, WeightedL1Ball};

/// Largest dimension the subset enumeration accepts.
pub const ORACLE_MAX_DIM: usize = 12;

/// Brute-force projection onto `B_l1[w, delta]`.
///
/// Works in the nonnegative orthant on `|h|`. For every nonempty support
/// `A`, the nearest point of `{u_A >= 0, sum_A w_i u_i = delta}` is the
/// halfspace step restricted to `A`; candidates with a negative entry are
/// discarded and the nearest remaining candidate wins. `h` itself is a
/// candidate when it is feasible.
pub fn oracle_project_weighted_l1(h: &[f64], ball: &WeightedL1Ball) -> Result<Vec<f64>> {
    let dim = h.len();
    check_dim(ball.dim(), dim)?;
    if dim > ORACLE_MAX_DIM {
        return Err(Error::OracleTooLarge {
            max: ORACLE_MAX_DIM,
            found: dim,
        });
    }
    let w = ball.weights();
    let delta = ball.delta();
    let a: Vec<f64> = h.iter().map(|v| v.abs()).collect();
    if dot(&a, w) <= delta {
        return Ok(h.to_vec());
    }

    let mut best: Option<(f64, Vec<f64>)> = None;
    let mut cand = vec![0.0; dim];
    for mask in 1u32..(1 << dim) {
        let members = || (0..dim).filter(move |i| mask & (1 << i) != 0);
        let sa: f64 = members().map(|i| w[i] * a[i]).sum();
        let sq: f64 = members().map(|i| w[i] * w[i]).sum();
        let t = (sa - delta) / sq;
        cand.iter_mut().for_each(|c| *c = 0.0);
        let mut ok = true;
        for i in members() {
            let u = a[i] - t * w[i];
            if u < 0.0 {
                ok = false;
                break;
            }
            cand[i] = u;
        }
        if !ok {
            continue;
        }
        let d: f64 = cand.iter().zip(&a).map(|(u, v)| (u - v) * (u - v)).sum();
        if best.as_ref().is_none_or(|(bd, _)| d < *bd) {
            best = Some((d, cand.clone()));
        }
    }
    // The full support with t > 0 always yields at least one candidate.
    let (_, u) = best.ok_or(Error::NoActiveCoordinate { delta })?;
    Ok(u.iter()
        .zip(h)
        .map(|(&ui, &hi)| if hi < 0.0 { -ui } else { ui })
        .collect())
}

/// Summary of an oracle comparison or a run check.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct OracleReport {
    pub name: String,
    pub cases: usize,
    pub max_deviation: f64,
    pub tolerance: f64,
    pub passed: bool,
    /// Payloads of failing cases, capped at a handful.
    pub failures: Vec<serde_json::Value>,
}

impl OracleReport {
    fn new(name: &str, tolerance: f64) -> Self {
        Self {
            name: name.to_string(),
            tolerance,
            passed: true,
            ..Default::default()
        }
    }

    fn record(&mut self, deviation: f64, payload: impl FnOnce() -> serde_json::Value) {
        self.cases += 1;
        if deviation.is_nan() || deviation > self.max_deviation {
            self.max_deviation = if deviation.is_nan() { f64::INFINITY } else { deviation };
        }
        if !(deviation <= self.tolerance) {
            self.passed = false;
            if self.failures.len() < 8 {
                self.failures.push(payload());
            }
        }
    }
}

/// Compares the sorting projection with the enumeration oracle on random
/// instances: `dim` uniform in `1..=max_dim`, weights and radius log-uniform
/// in `[0.1, 10]`, entries standard normal.
pub fn compare_ball_projection(cases: usize, max_dim: usize, seed: u64, tol: f64) -> Result<OracleReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = OracleReport::new("weighted_l1_projection_vs_oracle", tol);
    let log_uniform = |rng: &mut ChaCha8Rng| 10f64.powf(rng.random_range(-1.0..=1.0));
    for _ in 0..cases {
        let dim = rng.random_range(1..=max_dim.min(ORACLE_MAX_DIM));
        let h: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(&mut rng)).collect();
        let w: Vec<f64> = (0..dim).map(|_| log_uniform(&mut rng)).collect();
        let delta = log_uniform(&mut rng);
        let ball = WeightedL1Ball::new(w, delta)?;
        let fast = project_weighted_l1_ball(&h, &ball)?;
        let slow = oracle_project_weighted_l1(&h, &ball)?;
        let dev = dist(&fast, &slow);
        report.record(dev, || {
            serde_json::json!({ "h": h, "w": ball.weights(), "delta": delta, "fast": fast, "oracle": slow })
        });
    }
    Ok(report)
}

/// Outcome of a finite-horizon run check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunCheck {
    pub passed: bool,
    /// First index at which the property failed.
    pub first_violation: Option<usize>,
    /// Largest violation observed (distance increase or slab distance).
    pub worst: f64,
    pub checked: usize,
}

/// Checks `||h_{n+1} - h_*|| <= ||h_n - h_*|| + slack` along a trace of
/// estimates. The reported index is `n + 1`, the first estimate that moved
/// away from `h_star`.
pub fn check_fejer_run(trace: &[Vec<f64>], h_star: &[f64], slack: f64) -> RunCheck {
    let mut check = RunCheck {
        passed: true,
        first_violation: None,
        worst: 0.0,
        checked: 0,
    };
    let mut prev: Option<f64> = None;
    for (n, h) in trace.iter().enumerate() {
        let d = dist(h, h_star);
        if let Some(p) = prev {
            check.checked += 1;
            let increase = d - p;
            if increase > check.worst {
                check.worst = increase;
            }
            if !(increase <= slack) && check.first_violation.is_none() {
                check.first_violation = Some(n);
                check.passed = false;
            }
        }
        prev = Some(d);
    }
    check
}

/// Checks `max_{j in J_n} d(h_n, S_j) < tol` for every `n >= burn_in`, where
/// `J_n = max(0, n - q + 1) ..= n` and `slabs[j]` is the slab of time `j`.
///
/// Degenerate or mismatched slabs are reported as violations instead of
/// aborting the check.
pub fn check_slab_distances(
    trace: &[Vec<f64>],
    slabs: &[Hyperslab],
    q: usize,
    burn_in: usize,
    tol: f64,
) -> RunCheck {
    let mut check = RunCheck {
        passed: true,
        first_violation: None,
        worst: 0.0,
        checked: 0,
    };
    let q = q.max(1);
    for (n, h) in trace.iter().enumerate().skip(burn_in) {
        if n >= slabs.len() {
            break;
        }
        check.checked += 1;
        let lo = (n + 1).saturating_sub(q);
        let worst_here = slabs[lo..=n]
            .iter()
            .map(|s| crate::projections::distance_to_hyperslab(h, s).unwrap_or(f64::INFINITY))
            .fold(0.0, f64::max);
        if worst_here > check.worst {
            check.worst = worst_here;
        }
        if !(worst_here < tol) && check.first_violation.is_none() {
            check.first_violation = Some(n);
            check.passed = false;
        }
    }
    check
}

/// A recorded noiseless APL1 run in a configuration where `h_*` lies in
/// every slab and in the ball.
#[derive(Debug, Clone)]
pub struct FeasibleRun {
    pub h_star: Vec<f64>,
    /// `trace[n] = h_n`, starting at `h_0 = 0`.
    pub trace: Vec<Vec<f64>>,
    pub slabs: Vec<Hyperslab>,
    pub extrapolation: Vec<f64>,
    /// `d(h_n, B)` of each produced estimate w.r.t. the ball it was projected on.
    pub ball_excess: Vec<f64>,
    pub config: FilterConfig,
}

/// Parameters of the feasible noiseless scenario used by the run checks.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeasibleScenario {
    pub dim: usize,
    pub sparsity: usize,
    pub q: usize,
    pub eps: f64,
    pub n_iters: usize,
    /// Number of distinct measurements, replayed in order; 0 draws a fresh
    /// one every step.
    pub cycle: usize,
    /// Iterations excluded from the slab-distance check.
    pub burn_in: usize,
}

impl Default for FeasibleScenario {
    fn default() -> Self {
        Self {
            dim: 32,
            sparsity: 4,
            q: 64,
            eps: 0.05,
            n_iters: 800,
            cycle: 64,
            burn_in: 400,
        }
    }
}

/// Runs APL1 with `delta = ||h_*||_1`, `eps > 0` and no noise, so that `h_*`
/// belongs to every slab and to the ball.
pub fn feasible_apl1_run(scenario: &FeasibleScenario, seed: u64) -> Result<FeasibleRun> {
    let spec = ScenarioSpec {
        dim: scenario.dim,
        sparsity: scenario.sparsity,
        kind: ScenarioKind::Reconstruction,
        noise_var: 0.0,
        amplitude: Amplitude::Gaussian,
        seed,
    };
    let mut stream = MeasurementStream::new(&spec, 0)?;
    let h_star = stream.ground_truth(0).to_vec();
    let config = FilterConfig {
        q: scenario.q,
        eps: scenario.eps,
        delta: l1_norm(&h_star),
        weighting: Weighting::Unweighted,
        ..FilterConfig::new(scenario.dim)
    };
    let mut state = FilterState::init(&config, None)?;
    let mut trace = vec![state.estimate().to_vec()];
    let mut slabs = Vec::with_capacity(scenario.n_iters);
    let mut extrapolation = Vec::with_capacity(scenario.n_iters);
    let mut ball_excess = Vec::with_capacity(scenario.n_iters);
    let mut recorded: Vec<crate::datagen::Sample> = Vec::new();
    for n in 0..scenario.n_iters {
        let sample = if scenario.cycle > 0 && n >= scenario.cycle {
            recorded[n % scenario.cycle].clone()
        } else {
            stream.next_sample()
        };
        if scenario.cycle > 0 && n < scenario.cycle {
            recorded.push(sample.clone());
        }
        let sample = &sample;
        slabs.push(Hyperslab::new(sample.x.clone(), sample.y, config.eps)?);
        let info = state.advance(&sample.x, sample.y)?;
        extrapolation.push(info.extrapolation);
        let ball = WeightedL1Ball::new(state.weights().to_vec(), config.delta)?;
        ball_excess.push((ball.weighted_norm(state.estimate()) - config.delta).max(0.0));
        trace.push(state.estimate().to_vec());
    }
    Ok(FeasibleRun {
        h_star,
        trace,
        slabs,
        extrapolation,
        ball_excess,
        config,
    })
}

/// Runs the standard verification suites: oracle agreement on random
/// projections, then the run checks on `seeds` feasible noiseless runs.
pub fn run_suite(cases: usize, seeds: u64, master_seed: u64) -> Result<Vec<OracleReport>> {
    let mut reports = vec![compare_ball_projection(cases, 10, master_seed, 1e-9)?];

    let scenario = FeasibleScenario::default();
    let mut fejer = OracleReport::new("fejer_monotonicity", 1e-10);
    let mut slab = OracleReport::new("vanishing_slab_distance", 1e-6);
    let mut extrap = OracleReport::new("extrapolation_bound_at_least_one", 1e-9);
    let mut ball = OracleReport::new("estimate_inside_ball", 1e-9);
    let mut settle = OracleReport::new("step_norm_settles", 1e-8);
    for s in 0..seeds {
        let seed = master_seed.wrapping_add(1 + s);
        let run = feasible_apl1_run(&scenario, seed)?;
        let f = check_fejer_run(&run.trace, &run.h_star, 1e-10);
        fejer.record(f.worst, || serde_json::json!({ "seed": seed, "first_violation": f.first_violation }));
        let d = check_slab_distances(&run.trace, &run.slabs, scenario.q, scenario.burn_in, 1e-6);
        slab.record(d.worst, || serde_json::json!({ "seed": seed, "first_violation": d.first_violation }));
        let m_min = run.extrapolation.iter().copied().fold(f64::INFINITY, f64::min);
        extrap.record((1.0 - m_min).max(0.0), || serde_json::json!({ "seed": seed, "min": m_min }));
        let excess = run.ball_excess.iter().copied().fold(0.0, f64::max);
        ball.record(excess, || serde_json::json!({ "seed": seed, "excess": excess }));
        let n = run.trace.len();
        let last_step = dist(&run.trace[n - 1], &run.trace[n - 2]);
        settle.record(last_step, || serde_json::json!({ "seed": seed, "last_step": last_step }));
    }
    reports.extend([fejer, slab, extrap, ball, settle]);
    Ok(reports)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn oracle_worked_examples() {
        let b = WeightedL1Ball::new(vec![1.0, 1.0], 1.0).unwrap();
        assert_eq!(oracle_project_weighted_l1(&[0.3, -0.2], &b).unwrap(), vec![0.3, -0.2]);
        let p = oracle_project_weighted_l1(&[2.0, 0.5], &b).unwrap();
        assert!(dist(&p, &[1.0, 0.0]) < 1e-15);
        let b = WeightedL1Ball::new(vec![1.0, 2.0], 2.0).unwrap();
        assert!(dist(&oracle_project_weighted_l1(&[3.0, 3.0], &b).unwrap(), &[1.6, 0.2]) < 1e-14);
        assert!(dist(&oracle_project_weighted_l1(&[-3.0, 3.0], &b).unwrap(), &[-1.6, 0.2]) < 1e-14);
    }

    #[test]
    fn oracle_output_is_feasible() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..200 {
            let dim = rng.random_range(1..=8);
            let h: Vec<f64> = (0..dim).map(|_| 3.0 * rng.random::<f64>() - 1.5).collect();
            let w: Vec<f64> = (0..dim).map(|_| rng.random_range(0.1..5.0)).collect();
            let b = WeightedL1Ball::new(w, rng.random_range(0.1..2.0)).unwrap();
            let p = oracle_project_weighted_l1(&h, &b).unwrap();
            assert!(b.weighted_norm(&p) <= b.delta() + 1e-9);
        }
    }

    #[test]
    fn oracle_rejects_large_dimensions() {
        let b = WeightedL1Ball::unweighted(13, 1.0).unwrap();
        assert!(matches!(
            oracle_project_weighted_l1(&[1.0; 13], &b),
            Err(Error::OracleTooLarge { .. })
        ));
    }

    #[test]
    fn fast_projection_agrees_with_oracle() {
        let r = compare_ball_projection(300, 10, 11, 1e-9).unwrap();
        assert!(r.passed, "{r:?}");
        assert_eq!(r.cases, 300);
    }

    #[test]
    fn fejer_check_on_synthetic_traces() {
        let star = vec![0.0, 0.0];
        let constant = vec![vec![1.0, 1.0]; 5];
        assert!(check_fejer_run(&constant, &star, 1e-10).passed);

        let mut t: Vec<Vec<f64>> = (0..6).map(|k| vec![1.0 / (k + 1) as f64, 0.0]).collect();
        t[4] = vec![2.0, 0.0];
        let c = check_fejer_run(&t, &star, 1e-10);
        assert!(!c.passed);
        assert_eq!(c.first_violation, Some(4));
    }

    #[test]
    fn slab_check_edge_cases() {
        let trace = vec![vec![5.0, -5.0]; 4];
        let wide: Vec<Hyperslab> = (0..4)
            .map(|k| Hyperslab::new(vec![1.0, k as f64], 0.0, 1e6).unwrap())
            .collect();
        assert!(check_slab_distances(&trace, &wide, 2, 0, 1e-6).passed);

        // x·h = 0 and x·h = 10 cannot both hold; some slab is always missed.
        let apart = vec![
            Hyperslab::new(vec![1.0, 0.0], 0.0, 0.1).unwrap(),
            Hyperslab::new(vec![1.0, 0.0], 10.0, 0.1).unwrap(),
            Hyperslab::new(vec![1.0, 0.0], 0.0, 0.1).unwrap(),
            Hyperslab::new(vec![0.0, 0.0], 0.0, 0.1).unwrap(),
        ];
        let c = check_slab_distances(&trace, &apart, 2, 0, 1e-6);
        assert!(!c.passed);
        assert_eq!(c.first_violation, Some(0));
    }

    #[test]
    fn feasible_run_is_monotone_and_settles() {
        let scenario = FeasibleScenario::default();
        let run = feasible_apl1_run(&scenario, 5).unwrap();
        assert!(check_fejer_run(&run.trace, &run.h_star, 1e-10).passed);
        let d = check_slab_distances(&run.trace, &run.slabs, scenario.q, scenario.burn_in, 1e-6);
        assert!(d.passed, "{d:?}");
        assert!(run.extrapolation.iter().all(|&m| m >= 1.0 - 1e-9));
        assert!(run.ball_excess.iter().all(|&e| e <= 1e-9));
    }
}
