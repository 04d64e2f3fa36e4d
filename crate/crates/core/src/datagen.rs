//! Synthetic measurement streams `y_n = x_n·h_*(n) + v_n`.
//!
//! Every stream owns a ChaCha8 generator seeded from the scenario seed and
//! switched to the stream of its trial index, so trial `k` of a given seed
//! yields the same samples on every platform and in any execution order.
//! Within a stream the draws are, in order: the support and amplitudes of
//! `h_*`, then per sample the regressor entries followed by the noise.

use std::collections::VecDeque;

use rand::seq::index::sample as sample_indices;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{dot, norm_sq};

/// Dimension of the time-varying system.
pub const TIMEVARYING_DIM: usize = 100;
/// Last (1-based) time instant before the abrupt change.
pub const TIMEVARYING_SWITCH: usize = 500;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScenarioKind {
    /// Signal reconstruction: i.i.d. Gaussian measurement vectors.
    Reconstruction,
    /// System identification: shift-register regressors of a white input.
    Sysid,
    /// System identification with the abrupt support change after time 500.
    Timevarying,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Amplitude {
    #[default]
    Unit,
    Gaussian,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSpec {
    pub dim: usize,
    /// Number of nonzero coefficients of `h_*`.
    pub sparsity: usize,
    pub kind: ScenarioKind,
    /// Noise variance `sigma^2`.
    pub noise_var: f64,
    #[serde(default)]
    pub amplitude: Amplitude,
    #[serde(default)]
    pub seed: u64,
}

impl ScenarioSpec {
    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 {
            return Err(Error::invalid("dim", "must be >= 1"));
        }
        if self.sparsity == 0 || self.sparsity > self.dim {
            return Err(Error::invalid(
                "sparsity",
                format!("must lie in 1..={}, got {}", self.dim, self.sparsity),
            ));
        }
        if !(self.noise_var >= 0.0) || !self.noise_var.is_finite() {
            return Err(Error::invalid("noise_var", format!("must be finite and >= 0, got {}", self.noise_var)));
        }
        if self.kind == ScenarioKind::Timevarying && self.dim != TIMEVARYING_DIM {
            return Err(Error::invalid(
                "dim",
                format!("the time-varying scenario has dimension {TIMEVARYING_DIM}"),
            ));
        }
        Ok(())
    }

    pub fn noise_std(&self) -> f64 {
        self.noise_var.sqrt()
    }
}

/// Draws an `sparsity`-sparse vector from `rng`: uniformly random distinct
/// positions, amplitudes 1 or standard normal.
pub fn sample_sparse_vector<R: Rng + ?Sized>(
    rng: &mut R,
    dim: usize,
    sparsity: usize,
    amplitude: Amplitude,
) -> Result<Vec<f64>> {
    if sparsity > dim {
        return Err(Error::invalid("sparsity", format!("{sparsity} exceeds dimension {dim}")));
    }
    let mut h = vec![0.0; dim];
    for i in sample_indices(rng, dim, sparsity) {
        h[i] = match amplitude {
            Amplitude::Unit => 1.0,
            Amplitude::Gaussian => loop {
                // a zero draw would break the exact sparsity count
                let v: f64 = StandardNormal.sample(rng);
                if v != 0.0 {
                    break v;
                }
            },
        };
    }
    Ok(h)
}

/// Seeded form of [`sample_sparse_vector`].
pub fn gen_sparse_vector(dim: usize, sparsity: usize, amplitude: Amplitude, seed: u64) -> Result<Vec<f64>> {
    sample_sparse_vector(&mut ChaCha8Rng::seed_from_u64(seed), dim, sparsity, amplitude)
}

/// Ground truth of the time-varying system at the 1-based time `n`.
///
/// Up to time 500 coefficients 1..=5 equal one. From time 501 on,
/// coefficients 2 and 4 are zero and the odd coefficients 7..=15 are one,
/// giving the support {1, 3, 5, 7, 9, 11, 13, 15}. Coefficient `k` is stored
/// at index `k - 1`.
pub fn gen_timevarying_truth(n: usize) -> Vec<f64> {
    let mut h = vec![0.0; TIMEVARYING_DIM];
    if n <= TIMEVARYING_SWITCH {
        h[..5].fill(1.0);
    } else {
        for k in [1usize, 3, 5, 7, 9, 11, 13, 15] {
            h[k - 1] = 1.0;
        }
    }
    h
}

/// `h_*` as a function of the 0-based sample index.
#[derive(Debug, Clone, PartialEq)]
pub enum TruthModel {
    Fixed(Vec<f64>),
    /// `before` for samples `0..switch_at`, `after` from then on.
    Switching {
        before: Vec<f64>,
        after: Vec<f64>,
        switch_at: usize,
    },
}

impl TruthModel {
    pub fn at(&self, index: usize) -> &[f64] {
        match self {
            TruthModel::Fixed(h) => h,
            TruthModel::Switching {
                before,
                after,
                switch_at,
            } => {
                if index < *switch_at {
                    before
                } else {
                    after
                }
            }
        }
    }
}

/// One measurement pair together with the noise realisation that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub x: Vec<f64>,
    pub y: f64,
    pub noise: f64,
}

#[derive(Debug, Clone)]
pub struct MeasurementStream {
    rng: ChaCha8Rng,
    kind: ScenarioKind,
    noise: Option<Normal<f64>>,
    truth: TruthModel,
    /// Shift register of the system-identification input, newest first.
    register: VecDeque<f64>,
    index: usize,
}

impl MeasurementStream {
    /// Stream for trial `trial` of `spec`.
    pub fn new(spec: &ScenarioSpec, trial: u64) -> Result<Self> {
        spec.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        rng.set_stream(trial);
        let truth = match spec.kind {
            ScenarioKind::Reconstruction | ScenarioKind::Sysid => {
                TruthModel::Fixed(sample_sparse_vector(&mut rng, spec.dim, spec.sparsity, spec.amplitude)?)
            }
            ScenarioKind::Timevarying => TruthModel::Switching {
                before: gen_timevarying_truth(TIMEVARYING_SWITCH),
                after: gen_timevarying_truth(TIMEVARYING_SWITCH + 1),
                switch_at: TIMEVARYING_SWITCH,
            },
        };
        let noise = if spec.noise_var > 0.0 {
            Some(Normal::new(0.0, spec.noise_std()).map_err(|e| Error::invalid("noise_var", e.to_string()))?)
        } else {
            None
        };
        Ok(Self {
            rng,
            kind: spec.kind,
            noise,
            truth,
            register: VecDeque::from(vec![0.0; spec.dim]),
            index: 0,
        })
    }

    pub fn dim(&self) -> usize {
        self.truth.at(0).len()
    }

    /// `h_*` behind the sample with 0-based index `index`.
    pub fn ground_truth(&self, index: usize) -> &[f64] {
        self.truth.at(index)
    }

    pub fn truth_model(&self) -> &TruthModel {
        &self.truth
    }

    /// Index of the next sample to be emitted.
    pub fn position(&self) -> usize {
        self.index
    }

    pub fn next_sample(&mut self) -> Sample {
        let x: Vec<f64> = match self.kind {
            ScenarioKind::Reconstruction => (0..self.dim()).map(|_| StandardNormal.sample(&mut self.rng)).collect(),
            ScenarioKind::Sysid | ScenarioKind::Timevarying => {
                let u: f64 = StandardNormal.sample(&mut self.rng);
                self.register.pop_back();
                self.register.push_front(u);
                self.register.iter().copied().collect()
            }
        };
        let noise = self.noise.map_or(0.0, |n| n.sample(&mut self.rng));
        let y = dot(&x, self.truth.at(self.index)) + noise;
        self.index += 1;
        Sample { x, y, noise }
    }

    /// `||h_*(index)||^2`
    pub fn truth_norm_sq(&self, index: usize) -> f64 {
        norm_sq(self.truth.at(index))
    }
}

impl Iterator for MeasurementStream {
    type Item = Sample;

    fn next(&mut self) -> Option<Sample> {
        Some(self.next_sample())
    }
}
