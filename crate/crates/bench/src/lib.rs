//! Fixtures shared by the benchmarks.

use apwl1::datagen::{Amplitude, MeasurementStream, Sample, ScenarioKind, ScenarioSpec};
use apwl1::{FilterConfig, FilterState, WeightedL1Ball};

pub const DIMS: [usize; 4] = [500, 1000, 2000, 4000];

pub fn spec(dim: usize, sparsity: usize) -> ScenarioSpec {
    ScenarioSpec {
        dim,
        sparsity,
        kind: ScenarioKind::Reconstruction,
        noise_var: 0.1,
        amplitude: Amplitude::Gaussian,
        seed: 7,
    }
}

pub fn samples(dim: usize, count: usize) -> Vec<Sample> {
    MeasurementStream::new(&spec(dim, 20), 0).unwrap().take(count).collect()
}

/// A filter that has already consumed `warmup` samples, so its estimate and
/// weights look like those of a running filter.
pub fn warm_filter(dim: usize, q: usize, warmup: &[Sample]) -> FilterState {
    let cfg = FilterConfig {
        q,
        eps: 1.3 * 0.1f64.sqrt(),
        delta: 20.0,
        ..FilterConfig::new(dim)
    };
    let mut state = FilterState::init(&cfg, None).unwrap();
    for s in warmup {
        state.advance(&s.x, s.y).unwrap();
    }
    state
}

/// A dense point well outside a reweighted ball of the given dimension.
pub fn ball_instance(dim: usize) -> (Vec<f64>, WeightedL1Ball) {
    let s = samples(dim, 1).pop().unwrap();
    let w: Vec<f64> = (0..dim).map(|i| 1.0 / (0.01 + (i % 7) as f64 * 0.1)).collect();
    (s.x, WeightedL1Ball::new(w, 20.0).unwrap())
}
