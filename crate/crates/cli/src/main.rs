use std::path::PathBuf;
use std::process::ExitCode;

use apwl1::harness::{export_results, export_sweep, resolve_config, run_ensemble, sensitivity_sweep, SweepParameter};
use apwl1::{verify, Error, ExperimentConfig};
use clap::{Parser, Subcommand};
use serde_json::json;

#[derive(Parser)]
#[command(name = "apwl1", version, about = "Adaptive projection filters for online sparse estimation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the ensemble described by a config file and export the MSE curves.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Rerun the ensemble with one parameter scaled by `1 + deviation`.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value = "delta")]
        param: SweepParameter,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true, default_value = "-0.1,0,0.5,1.0")]
        deviations: Vec<f64>,
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check the ball projection against the brute-force oracle and run the
    /// convergence checks on feasible noiseless runs.
    Verify {
        #[arg(long, default_value_t = 1000)]
        cases: usize,
        #[arg(long, default_value_t = 50)]
        seeds: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn load(config: &PathBuf, trials: Option<usize>, seed: Option<u64>) -> Result<ExperimentConfig, Error> {
    let mut cfg = ExperimentConfig::load(config)?;
    if let Some(t) = trials {
        cfg.n_trials = t;
    }
    if let Some(s) = seed {
        cfg.seed = s;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn out_dir(cfg: &ExperimentConfig, out: Option<PathBuf>) -> PathBuf {
    out.unwrap_or_else(|| PathBuf::from(&cfg.output.dir))
}

/// Returns the report and whether every check passed.
fn execute(command: Command) -> Result<(serde_json::Value, bool), Error> {
    match command {
        Command::Run {
            config,
            trials,
            seed,
            out,
        } => {
            let cfg = load(&config, trials, seed)?;
            let (resolved, choices) = resolve_config(&cfg)?;
            let traces = run_ensemble(&resolved)?;
            let written = export_results(out_dir(&cfg, out), &resolved, &traces, &choices)?;
            let summary: Vec<_> = traces
                .iter()
                .map(|t| {
                    json!({
                        "tag": t.tag,
                        "valid_trials": t.valid_trials,
                        "mse_db_at_eval": t.at(resolved.eval_iteration),
                    })
                })
                .collect();
            Ok((
                json!({ "eval_iteration": resolved.eval_iteration, "algorithms": summary, "files": written }),
                true,
            ))
        }
        Command::Sweep {
            config,
            param,
            deviations,
            trials,
            seed,
            out,
        } => {
            let cfg = load(&config, trials, seed)?;
            let (resolved, choices) = resolve_config(&cfg)?;
            let table = sensitivity_sweep(&resolved, param, &deviations)?;
            let written = export_sweep(out_dir(&cfg, out), &resolved, &table, &choices)?;
            Ok((json!({ "sweep": table, "files": written }), true))
        }
        Command::Verify { cases, seeds, seed } => {
            let reports = verify::run_suite(cases, seeds, seed)?;
            let passed = reports.iter().all(|r| r.passed);
            Ok((json!({ "passed": passed, "reports": reports }), passed))
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok((report, passed)) => {
            println!("{}", serde_json::to_string_pretty(&report).expect("serializable report"));
            if passed {
                ExitCode::SUCCESS
            } else {
                eprintln!("{}", json!({ "error": "verification_failed", "message": "one or more checks failed" }));
                ExitCode::FAILURE
            }
        }
        Err(e) => {
            let report = json!({ "error": e.kind(), "message": e.to_string() });
            eprintln!("{report}");
            ExitCode::FAILURE
        }
    }
}
