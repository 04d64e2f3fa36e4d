//! Monte Carlo experiment harness: configuration, ensemble runs, baseline
//! tuning, parameter sweeps and export.

pub mod config;
pub mod ensemble;
pub mod export;
pub mod sweep;

pub use config::{AlgorithmSpec, ExperimentConfig, GridSpec, LassoSpec, LmsSpec, OutputSpec, ProjectionSpec};
pub use ensemble::{run_ensemble, run_trial, run_trials, to_db, Estimator, MseTrace, TrialRecord, MSE_FLOOR_DB};
pub use export::{export_results, export_sweep, read_mse_csv, write_mse_csv, Written};
pub use sweep::{grid_search_lms, resolve_config, sensitivity_sweep, GridChoice, SweepParameter, SweepTable};
