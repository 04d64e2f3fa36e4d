//! Online sparse system estimation with adaptive projection filters.
//!
//! Each measurement `(x_n, y_n)` defines a hyperslab
//! `{h : |<x_n, h> - y_n| <= eps}`. The filter averages projections onto the
//! last `q` hyperslabs, extrapolates the step, and then projects onto a
//! weighted l1 ball whose weights are re-estimated from the current
//! estimate (APWL1). With unit weights this is APL1.
//!
//! ```
//! use apwl1::{FilterConfig, FilterState};
//!
//! let mut cfg = FilterConfig::new(4);
//! cfg.q = 2;
//! cfg.eps = 0.01;
//! cfg.delta = 1.0;
//! let mut state = FilterState::init(&cfg, None).unwrap();
//! state.advance(&[1.0, 0.0, 0.0, 0.0], 0.5).unwrap();
//! assert_eq!(state.time(), 1);
//! ```

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod baselines;
pub mod datagen;
pub mod error;
pub mod filter;
pub mod harness;
pub mod linalg;
pub mod projections;
pub mod verify;

pub use baselines::{lasso_solve, lasso_solve_from, rzalms_step, zalms_step, LassoSolution, LmsConfig};
pub use datagen::{Amplitude, MeasurementStream, Sample, ScenarioKind, ScenarioSpec, TruthModel};
pub use error::{Error, Result};
pub use filter::{
    ChangeDetectorParams, EpsPrimeSchedule, FilterConfig, FilterState, MuRule, OmegaRule, StepInfo, Weighting,
};
pub use harness::{AlgorithmSpec, ExperimentConfig, MseTrace};
pub use projections::{
    project_hyperslab, project_weighted_l1_ball, BallProjection, EstimateVector, Hyperslab, WeightedL1Ball,
};
