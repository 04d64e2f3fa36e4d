//! Experiment configuration, stored as TOML.
//!
//! ```toml
//! n_iters = 1000
//! n_trials = 100
//! seed = 7
//! eval_iteration = 450
//!
//! [scenario]
//! dim = 100
//! sparsity = 5
//! kind = "sysid"            # reconstruction | sysid | timevarying
//! noise_var = 0.1
//! amplitude = "unit"        # unit | gaussian
//!
//! [[algorithms]]
//! kind = "apwl1"            # apwl1 | apl1 | zalms | rzalms | lasso | oracle
//! q = 25
//!
//! [[algorithms]]
//! kind = "rzalms"           # mu / rho omitted: grid-searched at run time
//! ```
//!
//! Optional projection parameters fall back to the defaults of the
//! experiments: `eps = 1.3 sigma`, `delta = S` for APWL1 and
//! `delta = ||h_*||_1` for APL1 and LASSO (resolved per trial).

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::baselines::LmsConfig;
use crate::datagen::ScenarioSpec;
use crate::error::{Error, Result};
use crate::filter::{ChangeDetectorParams, EpsPrimeSchedule, FilterConfig, MuRule, OmegaRule, Weighting};

/// Hyperslab half-width in units of the noise standard deviation.
pub const DEFAULT_EPS_PER_SIGMA: f64 = 1.3;

fn default_trials() -> usize {
    100
}
fn default_eval_iteration() -> usize {
    450
}
fn default_one() -> f64 {
    1.0
}
fn default_kappa() -> f64 {
    0.5
}
fn default_eps_prime() -> f64 {
    0.01
}
fn default_eta_inv() -> f64 {
    10.0
}
fn default_lasso_every() -> usize {
    50
}
fn default_lasso_max_iter() -> usize {
    500
}
fn default_lasso_tol() -> f64 {
    1e-9
}
fn default_out_dir() -> String {
    "results".to_string()
}
fn default_true() -> bool {
    true
}
fn is_one(v: &f64) -> bool {
    *v == 1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProjectionSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tag: Option<String>,
    pub q: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    /// Multiplier applied to the resolved radius.
    #[serde(default = "default_one", skip_serializing_if = "is_one")]
    pub delta_scale: f64,
    #[serde(default = "default_kappa")]
    pub kappa: f64,
    #[serde(default = "default_eps_prime")]
    pub eps_prime: f64,
    #[serde(default)]
    pub schedule: EpsPrimeSchedule,
    #[serde(default)]
    pub change_detector: ChangeDetectorParams,
}

impl ProjectionSpec {
    pub fn new(q: usize) -> Self {
        Self {
            tag: None,
            q,
            eps: None,
            delta: None,
            delta_scale: 1.0,
            kappa: default_kappa(),
            eps_prime: default_eps_prime(),
            schedule: EpsPrimeSchedule::default(),
            change_detector: ChangeDetectorParams::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LmsSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tag: Option<String>,
    /// Omitted values are chosen by grid search.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rho: Option<f64>,
    #[serde(default = "default_eta_inv")]
    pub eta_inv: f64,
}

impl LmsSpec {
    pub fn optimized() -> Self {
        Self {
            tag: None,
            mu: None,
            rho: None,
            eta_inv: default_eta_inv(),
        }
    }

    pub fn fixed(mu: f64, rho: f64) -> Self {
        Self {
            mu: Some(mu),
            rho: Some(rho),
            ..Self::optimized()
        }
    }

    pub fn lms_config(&self) -> Option<LmsConfig> {
        Some(LmsConfig {
            mu: self.mu?,
            rho: self.rho?,
            eta_inv: self.eta_inv,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LassoSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tag: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    #[serde(default = "default_one", skip_serializing_if = "is_one")]
    pub delta_scale: f64,
    /// Re-solve on all samples so far every `every` iterations.
    #[serde(default = "default_lasso_every")]
    pub every: usize,
    #[serde(default = "default_lasso_max_iter")]
    pub max_iter: usize,
    #[serde(default = "default_lasso_tol")]
    pub tol: f64,
}

impl Default for LassoSpec {
    fn default() -> Self {
        Self {
            tag: None,
            delta: None,
            delta_scale: 1.0,
            every: default_lasso_every(),
            max_iter: default_lasso_max_iter(),
            tol: default_lasso_tol(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum AlgorithmSpec {
    Apwl1(ProjectionSpec),
    Apl1(ProjectionSpec),
    Zalms(LmsSpec),
    Rzalms(LmsSpec),
    Lasso(LassoSpec),
    /// Reports the ground truth; a reference for the error floor.
    Oracle {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        tag: Option<String>,
    },
}

impl AlgorithmSpec {
    pub fn tag(&self) -> String {
        match self {
            AlgorithmSpec::Apwl1(p) => p.tag.clone().unwrap_or_else(|| format!("apwl1-q{}", p.q)),
            AlgorithmSpec::Apl1(p) => p.tag.clone().unwrap_or_else(|| format!("apl1-q{}", p.q)),
            AlgorithmSpec::Zalms(l) => l.tag.clone().unwrap_or_else(|| "zalms".into()),
            AlgorithmSpec::Rzalms(l) => l.tag.clone().unwrap_or_else(|| "rzalms".into()),
            AlgorithmSpec::Lasso(l) => l.tag.clone().unwrap_or_else(|| "lasso".into()),
            AlgorithmSpec::Oracle { tag } => tag.clone().unwrap_or_else(|| "oracle".into()),
        }
    }

    /// Filter configuration for one trial. `truth_l1` is `||h_*||_1` of that
    /// trial, the default APL1 radius.
    pub fn filter_config(&self, scenario: &ScenarioSpec, truth_l1: f64) -> Option<Result<FilterConfig>> {
        let (p, weighting) = match self {
            AlgorithmSpec::Apwl1(p) => (p, Weighting::Weighted),
            AlgorithmSpec::Apl1(p) => (p, Weighting::Unweighted),
            _ => return None,
        };
        let delta = p.delta.unwrap_or(match weighting {
            Weighting::Weighted => scenario.sparsity as f64,
            Weighting::Unweighted => truth_l1,
        }) * p.delta_scale;
        let cfg = FilterConfig {
            dim: scenario.dim,
            q: p.q,
            eps: p.eps.unwrap_or(DEFAULT_EPS_PER_SIGMA * scenario.noise_std()),
            delta,
            mu_rule: MuRule::FixedFraction { kappa: p.kappa },
            omega_rule: OmegaRule::Uniform,
            weighting,
            eps_prime_base: p.eps_prime,
            eps_prime_schedule: p.schedule,
            change_detector: p.change_detector,
        };
        Some(cfg.validate().map(|_| cfg))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    #[serde(default = "default_out_dir")]
    pub dir: String,
    #[serde(default = "default_true")]
    pub gnuplot: bool,
}

impl Default for OutputSpec {
    fn default() -> Self {
        Self {
            dir: default_out_dir(),
            gnuplot: true,
        }
    }
}

/// Log-spaced search grid for the LMS step size and attractor strength.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub mu_range: [f64; 2],
    pub mu_points: usize,
    pub rho_range: [f64; 2],
    pub rho_points: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            mu_range: [1e-4, 1e-1],
            mu_points: 13,
            rho_range: [1e-6, 1e-2],
            rho_points: 9,
        }
    }
}

impl GridSpec {
    pub fn mu_values(&self) -> Vec<f64> {
        log_space(self.mu_range, self.mu_points)
    }

    pub fn rho_values(&self) -> Vec<f64> {
        log_space(self.rho_range, self.rho_points)
    }
}

fn log_space([lo, hi]: [f64; 2], points: usize) -> Vec<f64> {
    match points {
        0 => Vec::new(),
        1 => vec![lo],
        _ => {
            let (a, b) = (lo.log10(), hi.log10());
            (0..points)
                .map(|k| 10f64.powf(a + (b - a) * k as f64 / (points - 1) as f64))
                .collect()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub n_iters: usize,
    #[serde(default = "default_trials")]
    pub n_trials: usize,
    /// Master seed; trial `k` uses stream `k` of this seed. Overrides
    /// `scenario.seed`.
    #[serde(default)]
    pub seed: u64,
    /// 1-based iteration used for steady-state comparisons.
    #[serde(default = "default_eval_iteration")]
    pub eval_iteration: usize,
    /// Extra 1-based iterations whose MSE is copied into the metadata.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub mse_eval_points: Vec<usize>,
    pub scenario: ScenarioSpec,
    pub algorithms: Vec<AlgorithmSpec>,
    #[serde(default)]
    pub grid: GridSpec,
    #[serde(default)]
    pub output: OutputSpec,
}

impl ExperimentConfig {
    pub fn new(scenario: ScenarioSpec, algorithms: Vec<AlgorithmSpec>, n_iters: usize, n_trials: usize) -> Self {
        Self {
            n_iters,
            n_trials,
            seed: scenario.seed,
            eval_iteration: default_eval_iteration().min(n_iters),
            mse_eval_points: Vec::new(),
            scenario,
            algorithms,
            grid: GridSpec::default(),
            output: OutputSpec::default(),
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        Ok(toml::to_string(self)?)
    }

    /// Scenario with the master seed applied.
    pub fn stream_spec(&self) -> ScenarioSpec {
        ScenarioSpec {
            seed: self.seed,
            ..self.scenario.clone()
        }
    }

    pub fn tags(&self) -> Vec<String> {
        self.algorithms.iter().map(AlgorithmSpec::tag).collect()
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_trials == 0 {
            return Err(Error::invalid("n_trials", "must be >= 1"));
        }
        if self.n_iters == 0 {
            return Err(Error::invalid("n_iters", "must be >= 1"));
        }
        if self.eval_iteration == 0 || self.eval_iteration > self.n_iters {
            return Err(Error::EvalOutOfRange {
                iteration: self.eval_iteration,
                n_iters: self.n_iters,
            });
        }
        if let Some(&p) = self.mse_eval_points.iter().find(|&&p| p == 0 || p > self.n_iters) {
            return Err(Error::EvalOutOfRange {
                iteration: p,
                n_iters: self.n_iters,
            });
        }
        if self.algorithms.is_empty() {
            return Err(Error::Empty("algorithms"));
        }
        let tags = self.tags();
        for (i, t) in tags.iter().enumerate() {
            if tags[..i].contains(t) {
                return Err(Error::invalid("algorithms", format!("duplicate tag `{t}`")));
            }
            if t.contains(',') || t.contains('"') {
                return Err(Error::invalid("algorithms", format!("tag `{t}` must not contain `,` or `\"`")));
            }
        }
        self.scenario.validate()?;
        for alg in &self.algorithms {
            match alg {
                AlgorithmSpec::Apwl1(p) | AlgorithmSpec::Apl1(p) => {
                    if let Some(Err(e)) = alg.filter_config(&self.scenario, 1.0) {
                        // the APL1 placeholder radius is irrelevant unless delta is the culprit
                        if p.delta.is_some() || !matches!(e, Error::InvalidParameter { name: "delta", .. }) {
                            return Err(e);
                        }
                    }
                }
                AlgorithmSpec::Zalms(l) | AlgorithmSpec::Rzalms(l) => {
                    if let Some(cfg) = l.lms_config() {
                        cfg.validate()?;
                    }
                }
                AlgorithmSpec::Lasso(l) => {
                    if l.every == 0 {
                        return Err(Error::invalid("every", "must be >= 1"));
                    }
                }
                AlgorithmSpec::Oracle { .. } => {}
            }
        }
        Ok(())
    }
}
