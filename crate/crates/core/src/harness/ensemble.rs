use ndarray::{ArrayView1, ArrayView2};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{AlgorithmSpec, ExperimentConfig, LassoSpec};
use crate::baselines::{lasso_solve_from, rzalms_step, zalms_step, LmsConfig};
use crate::datagen::{MeasurementStream, Sample, TruthModel};
use crate::error::{Error, Result};
use crate::filter::FilterState;
use crate::linalg::{all_finite, dist_sq, l1_norm};

/// Lowest value an MSE trace reports, in dB.
pub const MSE_FLOOR_DB: f64 = -150.0;

/// Normalised squared deviation `||h - h_*||^2 / ||h_*||^2`. The MSE
/// convention lives here only.
pub fn normalized_deviation(error_sq: f64, truth_norm_sq: f64) -> f64 {
    error_sq / truth_norm_sq
}

/// `10 log10(v)`, clamped below at [`MSE_FLOOR_DB`].
pub fn to_db(v: f64) -> f64 {
    if v > 0.0 {
        (10.0 * v.log10()).max(MSE_FLOOR_DB)
    } else {
        MSE_FLOOR_DB
    }
}

/// An online estimator driven by the harness.
pub trait Estimator: Send {
    fn estimate(&self) -> &[f64];
    /// Consumes the sample with 0-based index `index`.
    fn update(&mut self, index: usize, sample: &Sample) -> Result<()>;
}

struct ProjectionEstimator {
    state: FilterState,
}

impl Estimator for ProjectionEstimator {
    fn estimate(&self) -> &[f64] {
        self.state.estimate()
    }

    fn update(&mut self, _index: usize, sample: &Sample) -> Result<()> {
        let info = self.state.advance(&sample.x, sample.y)?;
        if info.extrapolation < 1.0 - 1e-9 {
            return Err(Error::invalid("extrapolation", format!("M_n = {} < 1", info.extrapolation)));
        }
        Ok(())
    }
}

#[derive(Clone, Copy)]
enum LmsVariant {
    ZeroAttracting,
    Reweighted,
}

struct LmsEstimator {
    h: Vec<f64>,
    cfg: LmsConfig,
    variant: LmsVariant,
}

impl Estimator for LmsEstimator {
    fn estimate(&self) -> &[f64] {
        &self.h
    }

    fn update(&mut self, _index: usize, sample: &Sample) -> Result<()> {
        let next = match self.variant {
            LmsVariant::ZeroAttracting => zalms_step(&self.h, &sample.x, sample.y, &self.cfg)?,
            LmsVariant::Reweighted => rzalms_step(&self.h, &sample.x, sample.y, &self.cfg)?,
        };
        if !all_finite(&next) {
            return Err(Error::NonFinite("lms estimate (diverged)"));
        }
        self.h = next;
        Ok(())
    }
}

/// Batch LASSO re-solved on every sample seen so far, every `every` samples,
/// warm-started from the previous solution. Between solves the last
/// solution is held.
struct LassoEstimator {
    h: Vec<f64>,
    rows: Vec<f64>,
    ys: Vec<f64>,
    delta: f64,
    spec: LassoSpec,
}

impl Estimator for LassoEstimator {
    fn estimate(&self) -> &[f64] {
        &self.h
    }

    fn update(&mut self, index: usize, sample: &Sample) -> Result<()> {
        self.rows.extend_from_slice(&sample.x);
        self.ys.push(sample.y);
        if (index + 1).is_multiple_of(self.spec.every) {
            let n = self.ys.len();
            let x = ArrayView2::from_shape((n, self.h.len()), &self.rows).expect("row-major design");
            let sol = lasso_solve_from(
                x,
                ArrayView1::from(&self.ys),
                self.delta,
                Some(&self.h),
                self.spec.max_iter,
                self.spec.tol,
            )?;
            self.h = sol.h;
        }
        Ok(())
    }
}

struct OracleEstimator {
    truth: TruthModel,
    index: usize,
}

impl Estimator for OracleEstimator {
    fn estimate(&self) -> &[f64] {
        self.truth.at(self.index)
    }

    fn update(&mut self, index: usize, _sample: &Sample) -> Result<()> {
        self.index = index;
        Ok(())
    }
}

/// Builds the estimator for `spec` in the trial whose stream is `stream`.
pub fn build_estimator(
    spec: &AlgorithmSpec,
    config: &ExperimentConfig,
    stream: &MeasurementStream,
) -> Result<Box<dyn Estimator>> {
    let dim = config.scenario.dim;
    let truth_l1 = l1_norm(stream.ground_truth(0));
    Ok(match spec {
        AlgorithmSpec::Apwl1(_) | AlgorithmSpec::Apl1(_) => {
            let cfg = spec.filter_config(&config.scenario, truth_l1).expect("projection algorithm")?;
            Box::new(ProjectionEstimator {
                state: FilterState::init(&cfg, None)?,
            })
        }
        AlgorithmSpec::Zalms(l) | AlgorithmSpec::Rzalms(l) => {
            let cfg = l
                .lms_config()
                .ok_or_else(|| Error::invalid("mu/rho", format!("`{}` has unresolved parameters", spec.tag())))?;
            cfg.validate()?;
            let variant = match spec {
                AlgorithmSpec::Zalms(_) => LmsVariant::ZeroAttracting,
                _ => LmsVariant::Reweighted,
            };
            Box::new(LmsEstimator {
                h: vec![0.0; dim],
                cfg,
                variant,
            })
        }
        AlgorithmSpec::Lasso(l) => {
            let delta = l.delta.unwrap_or(truth_l1) * l.delta_scale;
            if !(delta > 0.0) {
                return Err(Error::invalid("delta", format!("must be > 0, got {delta}")));
            }
            if l.every == 0 {
                return Err(Error::invalid("every", "must be >= 1"));
            }
            Box::new(LassoEstimator {
                h: vec![0.0; dim],
                rows: Vec::new(),
                ys: Vec::new(),
                delta,
                spec: l.clone(),
            })
        }
        AlgorithmSpec::Oracle { .. } => Box::new(OracleEstimator {
            truth: stream.truth_model().clone(),
            index: 0,
        }),
    })
}

/// Per-algorithm outcome of one trial.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialRecord {
    /// `||h_*(n)||^2` for every sample index.
    pub truth_norm_sq: Vec<f64>,
    /// `error_n = ||h_{n+1} - h_*(n)||^2` per algorithm, or the failure.
    pub errors: Vec<std::result::Result<Vec<f64>, String>>,
}

impl TrialRecord {
    /// Normalised deviation sequence of algorithm `k`, if valid.
    pub fn normalized(&self, k: usize) -> Option<Vec<f64>> {
        self.errors[k].as_ref().ok().map(|e| {
            e.iter()
                .zip(&self.truth_norm_sq)
                .map(|(&err, &t)| normalized_deviation(err, t))
                .collect()
        })
    }
}

/// Runs every configured algorithm on the stream of trial `trial`.
///
/// All algorithms see the same samples. An algorithm that errors or
/// produces a non-finite estimate is marked invalid for this trial and the
/// others continue.
pub fn run_trial(config: &ExperimentConfig, trial: u64) -> Result<TrialRecord> {
    let mut stream = MeasurementStream::new(&config.stream_spec(), trial)?;
    let mut estimators: Vec<std::result::Result<Box<dyn Estimator>, String>> = config
        .algorithms
        .iter()
        .map(|a| build_estimator(a, config, &stream).map_err(|e| e.to_string()))
        .collect();
    let n_iters = config.n_iters;
    let mut errors: Vec<std::result::Result<Vec<f64>, String>> = estimators
        .iter()
        .map(|e| match e {
            Ok(_) => Ok(Vec::with_capacity(n_iters)),
            Err(msg) => Err(msg.clone()),
        })
        .collect();
    let mut truth_norm_sq = Vec::with_capacity(n_iters);

    for n in 0..n_iters {
        let sample = stream.next_sample();
        let truth = stream.ground_truth(n);
        truth_norm_sq.push(crate::linalg::norm_sq(truth));
        for (est, err) in estimators.iter_mut().zip(errors.iter_mut()) {
            let (Ok(e), Ok(trace)) = (est.as_mut(), err.as_mut()) else {
                continue;
            };
            match e.update(n, &sample).map(|_| dist_sq(e.estimate(), truth)) {
                Ok(d) if d.is_finite() => trace.push(d),
                Ok(_) => *err = Err(format!("iteration {}: squared error overflowed", n + 1)),
                Err(failure) => *err = Err(format!("iteration {}: {failure}", n + 1)),
            }
        }
    }
    Ok(TrialRecord { truth_norm_sq, errors })
}

/// Ensemble-averaged error curve of one algorithm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MseTrace {
    pub tag: String,
    /// Mean normalised deviation per iteration, in dB; index `k` is
    /// iteration `k + 1`.
    pub db: Vec<f64>,
    pub valid_trials: usize,
    pub failures: Vec<String>,
    pub seed: u64,
    pub config_hash: String,
}

impl MseTrace {
    /// MSE at the 1-based `iteration`.
    pub fn at(&self, iteration: usize) -> f64 {
        self.db[iteration - 1]
    }
}

/// Averages sequences element-wise in the given order and converts to dB.
pub fn average_db(sequences: &[Vec<f64>]) -> Vec<f64> {
    let Some(first) = sequences.first() else {
        return Vec::new();
    };
    let mut sum = vec![0.0; first.len()];
    for s in sequences {
        for (acc, v) in sum.iter_mut().zip(s) {
            *acc += v;
        }
    }
    let count = sequences.len() as f64;
    sum.into_iter().map(|s| to_db(s / count)).collect()
}

/// Runs all trials in parallel; the records come back in trial order.
pub fn run_trials(config: &ExperimentConfig) -> Result<Vec<TrialRecord>> {
    config.validate()?;
    (0..config.n_trials as u64)
        .into_par_iter()
        .map(|t| run_trial(config, t))
        .collect()
}

/// Ensemble MSE traces. Summation runs over trials in index order no matter
/// which thread finished first, so the result is reproducible bit for bit.
pub fn run_ensemble(config: &ExperimentConfig) -> Result<Vec<MseTrace>> {
    let records = run_trials(config)?;
    let hash = config_hash(config)?;
    config
        .algorithms
        .iter()
        .enumerate()
        .map(|(k, spec)| {
            let tag = spec.tag();
            let mut valid = Vec::new();
            let mut failures = Vec::new();
            for (t, r) in records.iter().enumerate() {
                match (&r.errors[k], r.normalized(k)) {
                    (_, Some(seq)) => valid.push(seq),
                    (Err(msg), None) => failures.push(format!("trial {t}: {msg}")),
                    (Ok(_), None) => unreachable!(),
                }
            }
            if valid.is_empty() {
                return Err(Error::AllTrialsInvalid(tag));
            }
            Ok(MseTrace {
                tag,
                db: average_db(&valid),
                valid_trials: valid.len(),
                failures,
                seed: config.seed,
                config_hash: hash.clone(),
            })
        })
        .collect()
}

/// FNV-1a of the canonical TOML form of the config.
pub fn config_hash(config: &ExperimentConfig) -> Result<String> {
    let text = config.to_toml_string()?;
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in text.bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    Ok(format!("{h:016x}"))
}
