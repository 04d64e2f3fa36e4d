//! Baseline parameter search and sensitivity sweeps.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{AlgorithmSpec, ExperimentConfig, LmsSpec, DEFAULT_EPS_PER_SIGMA};
use super::ensemble::{run_ensemble, run_trial, to_db};
use crate::error::{Error, Result};

/// Result of a grid search for one LMS-type baseline.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridChoice {
    pub mu: f64,
    pub rho: f64,
    /// Ensemble MSE in dB at the evaluation iteration.
    pub mse_db: f64,
}

/// Picks `(mu, rho)` on the configured log grid minimising the ensemble MSE
/// at `config.eval_iteration`. Candidates for which any trial diverges are
/// discarded.
pub fn grid_search_lms(config: &ExperimentConfig, index: usize) -> Result<GridChoice> {
    let (make, eta_inv): (fn(LmsSpec) -> AlgorithmSpec, f64) = match &config.algorithms[index] {
        AlgorithmSpec::Zalms(l) => (AlgorithmSpec::Zalms, l.eta_inv),
        AlgorithmSpec::Rzalms(l) => (AlgorithmSpec::Rzalms, l.eta_inv),
        other => return Err(Error::invalid("algorithms", format!("`{}` has no LMS parameters", other.tag()))),
    };
    let fixed = match &config.algorithms[index] {
        AlgorithmSpec::Zalms(l) | AlgorithmSpec::Rzalms(l) => (l.mu, l.rho),
        _ => unreachable!(),
    };
    let mus = fixed.0.map_or_else(|| config.grid.mu_values(), |m| vec![m]);
    let rhos = fixed.1.map_or_else(|| config.grid.rho_values(), |r| vec![r]);
    let candidates: Vec<(f64, f64)> = mus.iter().flat_map(|&m| rhos.iter().map(move |&r| (m, r))).collect();
    if candidates.is_empty() {
        return Err(Error::Empty("lms grid"));
    }

    let base = ExperimentConfig {
        n_iters: config.eval_iteration,
        mse_eval_points: Vec::new(),
        ..config.clone()
    };
    let eval = config.eval_iteration - 1;
    let scores: Vec<f64> = candidates
        .par_iter()
        .map(|&(mu, rho)| {
            let spec = make(LmsSpec {
                tag: None,
                mu: Some(mu),
                rho: Some(rho),
                eta_inv,
            });
            let cfg = ExperimentConfig {
                algorithms: vec![spec],
                ..base.clone()
            };
            let mut total = 0.0;
            for t in 0..cfg.n_trials as u64 {
                let Ok(record) = run_trial(&cfg, t) else {
                    return f64::INFINITY;
                };
                match record.normalized(0) {
                    Some(seq) => total += seq[eval],
                    None => return f64::INFINITY,
                }
            }
            total / cfg.n_trials as f64
        })
        .collect();
    let (best, score) = scores
        .iter()
        .enumerate()
        .filter(|(_, s)| s.is_finite())
        .min_by(|a, b| a.1.total_cmp(b.1))
        .ok_or_else(|| Error::AllTrialsInvalid(config.algorithms[index].tag()))?;
    Ok(GridChoice {
        mu: candidates[best].0,
        rho: candidates[best].1,
        mse_db: to_db(*score),
    })
}

/// Fills in every LMS parameter left open in the config by grid search.
/// Returns the resolved config and the choices made, keyed by tag.
pub fn resolve_config(config: &ExperimentConfig) -> Result<(ExperimentConfig, Vec<(String, GridChoice)>)> {
    config.validate()?;
    let mut resolved = config.clone();
    let mut choices = Vec::new();
    for k in 0..config.algorithms.len() {
        let open = match &config.algorithms[k] {
            AlgorithmSpec::Zalms(l) | AlgorithmSpec::Rzalms(l) => l.lms_config().is_none(),
            _ => false,
        };
        if !open {
            continue;
        }
        let choice = grid_search_lms(config, k)?;
        if let AlgorithmSpec::Zalms(l) | AlgorithmSpec::Rzalms(l) = &mut resolved.algorithms[k] {
            l.mu = Some(choice.mu);
            l.rho = Some(choice.rho);
        }
        choices.push((config.algorithms[k].tag(), choice));
    }
    Ok((resolved, choices))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SweepParameter {
    /// Ball radius of APWL1/APL1 and LASSO.
    Delta,
    /// Hyperslab half-width of APWL1/APL1.
    Eps,
    /// LMS step size.
    Mu,
    /// LMS zero-attractor strength.
    Rho,
}

impl std::str::FromStr for SweepParameter {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "delta" => Ok(Self::Delta),
            "eps" => Ok(Self::Eps),
            "mu" => Ok(Self::Mu),
            "rho" => Ok(Self::Rho),
            _ => Err(Error::invalid("param", format!("unknown parameter `{s}`"))),
        }
    }
}

impl std::fmt::Display for SweepParameter {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Delta => "delta",
            Self::Eps => "eps",
            Self::Mu => "mu",
            Self::Rho => "rho",
        })
    }
}

/// Scales `param` by `factor` in every algorithm it applies to. Returns how
/// many algorithms were touched. LMS parameters must be resolved.
pub fn scale_parameter(config: &mut ExperimentConfig, param: SweepParameter, factor: f64) -> usize {
    let sigma = config.scenario.noise_std();
    let mut touched = 0;
    for alg in &mut config.algorithms {
        let hit = match (param, alg) {
            (SweepParameter::Delta, AlgorithmSpec::Apwl1(p) | AlgorithmSpec::Apl1(p)) => {
                p.delta_scale *= factor;
                true
            }
            (SweepParameter::Delta, AlgorithmSpec::Lasso(l)) => {
                l.delta_scale *= factor;
                true
            }
            (SweepParameter::Eps, AlgorithmSpec::Apwl1(p) | AlgorithmSpec::Apl1(p)) => {
                p.eps = Some(p.eps.unwrap_or(DEFAULT_EPS_PER_SIGMA * sigma) * factor);
                true
            }
            (SweepParameter::Mu, AlgorithmSpec::Zalms(l) | AlgorithmSpec::Rzalms(l)) => {
                l.mu = l.mu.map(|m| m * factor);
                true
            }
            (SweepParameter::Rho, AlgorithmSpec::Zalms(l) | AlgorithmSpec::Rzalms(l)) => {
                l.rho = l.rho.map(|r| r * factor);
                true
            }
            _ => false,
        };
        touched += usize::from(hit);
    }
    touched
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub deviation: f64,
    /// MSE in dB at the evaluation iteration per algorithm; `None` where the
    /// entry is invalid.
    pub mse_db: Vec<Option<f64>>,
    /// Why entries are invalid, if any.
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepTable {
    pub parameter: SweepParameter,
    pub eval_iteration: usize,
    pub tags: Vec<String>,
    pub rows: Vec<SweepRow>,
}

impl SweepTable {
    pub fn column(&self, tag: &str) -> Option<Vec<Option<f64>>> {
        let k = self.tags.iter().position(|t| t == tag)?;
        Some(self.rows.iter().map(|r| r.mse_db[k]).collect())
    }
}

/// Re-runs the ensemble with `param` scaled by `1 + deviation` for each
/// deviation and reports the MSE at `config.eval_iteration`.
///
/// Open LMS parameters are resolved once up front, so deviations are taken
/// from the grid-searched values.
pub fn sensitivity_sweep(config: &ExperimentConfig, param: SweepParameter, deviations: &[f64]) -> Result<SweepTable> {
    let (base, _) = resolve_config(config)?;
    if scale_parameter(&mut base.clone(), param, 1.0) == 0 {
        return Err(Error::invalid("param", format!("no configured algorithm uses `{param}`")));
    }
    let tags = base.tags();
    let eval = base.eval_iteration;
    let rows = deviations
        .iter()
        .map(|&deviation| {
            let mut cfg = ExperimentConfig {
                n_iters: eval,
                mse_eval_points: Vec::new(),
                ..base.clone()
            };
            scale_parameter(&mut cfg, param, 1.0 + deviation);
            match cfg.validate().and_then(|_| run_ensemble(&cfg)) {
                Ok(traces) => SweepRow {
                    deviation,
                    mse_db: traces.iter().map(|t| Some(t.at(eval))).collect(),
                    note: None,
                },
                Err(e) => SweepRow {
                    deviation,
                    mse_db: vec![None; tags.len()],
                    note: Some(e.to_string()),
                },
            }
        })
        .collect();
    Ok(SweepTable {
        parameter: param,
        eval_iteration: eval,
        tags,
        rows,
    })
}
