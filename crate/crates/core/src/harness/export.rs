//! CSV, metadata and gnuplot output.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::process::Command;

use serde::Serialize;
use serde_json::{json, Value};

use super::config::ExperimentConfig;
use super::ensemble::MseTrace;
use super::sweep::{GridChoice, SweepTable};
use crate::error::{Error, Result};

pub const MSE_CSV: &str = "mse.csv";
pub const SWEEP_CSV: &str = "sweep.csv";
pub const METADATA_JSON: &str = "metadata.json";
pub const GNUPLOT_SCRIPT: &str = "plot.gp";

/// Files written by an export.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Written {
    pub data: PathBuf,
    pub metadata: PathBuf,
    pub plot: Option<PathBuf>,
}

/// `git describe --always --dirty` of the working directory, or `"unknown"`.
pub fn git_describe() -> String {
    Command::new("git")
        .args(["describe", "--always", "--dirty"])
        .output()
        .ok()
        .filter(|o| o.status.success())
        .and_then(|o| String::from_utf8(o.stdout).ok())
        .map(|s| s.trim().to_string())
        .filter(|s| !s.is_empty())
        .unwrap_or_else(|| "unknown".into())
}

/// Writes `iteration,<tag>,...` with one row per 1-based iteration.
pub fn write_mse_csv<W: io::Write>(out: W, traces: &[MseTrace]) -> Result<()> {
    let n = traces.first().ok_or(Error::Empty("traces"))?.db.len();
    if traces.iter().any(|t| t.db.len() != n) {
        return Err(Error::invalid("traces", "curves differ in length"));
    }
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["iteration".to_string()];
    header.extend(traces.iter().map(|t| t.tag.clone()));
    w.write_record(&header).map_err(io::Error::from)?;
    for k in 0..n {
        let mut row = vec![(k + 1).to_string()];
        row.extend(traces.iter().map(|t| t.db[k].to_string()));
        w.write_record(&row).map_err(io::Error::from)?;
    }
    w.flush()?;
    Ok(())
}

/// Parses a file written by [`write_mse_csv`] back into `(tags, columns)`.
pub fn read_mse_csv<R: io::Read>(input: R) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let mut r = csv::Reader::from_reader(input);
    let header = r.headers().map_err(io::Error::from)?.clone();
    if header.get(0) != Some("iteration") {
        return Err(Error::invalid("csv", "first column must be `iteration`"));
    }
    let tags: Vec<String> = header.iter().skip(1).map(str::to_string).collect();
    let mut columns = vec![Vec::new(); tags.len()];
    for (k, rec) in r.records().enumerate() {
        let rec = rec.map_err(io::Error::from)?;
        let it: usize = rec[0]
            .parse()
            .map_err(|_| Error::invalid("csv", format!("bad iteration `{}`", &rec[0])))?;
        if it != k + 1 {
            return Err(Error::invalid("csv", format!("expected iteration {}, found {it}", k + 1)));
        }
        for (col, field) in columns.iter_mut().zip(rec.iter().skip(1)) {
            col.push(
                field
                    .parse()
                    .map_err(|_| Error::invalid("csv", format!("bad value `{field}`")))?,
            );
        }
    }
    Ok((tags, columns))
}

pub fn write_sweep_csv<W: io::Write>(out: W, table: &SweepTable) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec![format!("{}_deviation", table.parameter)];
    header.extend(table.tags.iter().cloned());
    w.write_record(&header).map_err(io::Error::from)?;
    for row in &table.rows {
        let mut rec = vec![row.deviation.to_string()];
        rec.extend(row.mse_db.iter().map(|v| v.map_or_else(|| "nan".to_string(), |v| v.to_string())));
        w.write_record(&rec).map_err(io::Error::from)?;
    }
    w.flush()?;
    Ok(())
}

fn gnuplot_script(data: &str, xlabel: &str, columns: usize, tags: &[String]) -> String {
    let mut s = format!(
        "set datafile separator ','\nset key autotitle columnhead\nset xlabel '{xlabel}'\nset ylabel 'MSE (dB)'\nset grid\nplot "
    );
    let series: Vec<String> = (0..columns)
        .map(|k| format!("'{data}' using 1:{} with lines title '{}'", k + 2, tags[k]))
        .collect();
    s.push_str(&series.join(", \\\n     "));
    s.push('\n');
    s
}

fn write_metadata(path: &Path, meta: &Value) -> Result<()> {
    fs::write(path, serde_json::to_string_pretty(meta)? + "\n")?;
    Ok(())
}

fn base_metadata(config: &ExperimentConfig, choices: &[(String, GridChoice)]) -> Value {
    json!({
        "config": config,
        "seed": config.seed,
        "n_trials": config.n_trials,
        "git": git_describe(),
        "grid_choices": choices.iter().map(|(t, c)| json!({"tag": t, "mu": c.mu, "rho": c.rho, "mse_db": c.mse_db})).collect::<Vec<_>>(),
    })
}

/// Writes `mse.csv`, `metadata.json` and, if enabled, `plot.gp` into `dir`.
///
/// `config` should be the resolved configuration the traces came from.
pub fn export_results(
    dir: impl AsRef<Path>,
    config: &ExperimentConfig,
    traces: &[MseTrace],
    choices: &[(String, GridChoice)],
) -> Result<Written> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir)?;
    let data = dir.join(MSE_CSV);
    write_mse_csv(io::BufWriter::new(fs::File::create(&data)?), traces)?;

    let mut points = vec![config.eval_iteration];
    points.extend(config.mse_eval_points.iter().copied());
    let mut meta = base_metadata(config, choices);
    meta["algorithms"] = traces
        .iter()
        .map(|t| {
            let at: serde_json::Map<String, Value> = points
                .iter()
                .filter(|&&p| p >= 1 && p <= t.db.len())
                .map(|&p| (p.to_string(), json!(t.at(p))))
                .collect();
            json!({
                "tag": t.tag,
                "valid_trials": t.valid_trials,
                "failures": t.failures,
                "config_hash": t.config_hash,
                "mse_db_at": at,
            })
        })
        .collect();
    let metadata = dir.join(METADATA_JSON);
    write_metadata(&metadata, &meta)?;

    let plot = if config.output.gnuplot {
        let tags: Vec<String> = traces.iter().map(|t| t.tag.clone()).collect();
        let p = dir.join(GNUPLOT_SCRIPT);
        fs::write(&p, gnuplot_script(MSE_CSV, "iteration", traces.len(), &tags))?;
        Some(p)
    } else {
        None
    };
    Ok(Written { data, metadata, plot })
}

/// Writes `sweep.csv`, `metadata.json` and, if enabled, `plot.gp` into `dir`.
pub fn export_sweep(
    dir: impl AsRef<Path>,
    config: &ExperimentConfig,
    table: &SweepTable,
    choices: &[(String, GridChoice)],
) -> Result<Written> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir)?;
    let data = dir.join(SWEEP_CSV);
    write_sweep_csv(io::BufWriter::new(fs::File::create(&data)?), table)?;
    let mut meta = base_metadata(config, choices);
    meta["sweep"] = serde_json::to_value(table)?;
    let metadata = dir.join(METADATA_JSON);
    write_metadata(&metadata, &meta)?;
    let plot = if config.output.gnuplot {
        let p = dir.join(GNUPLOT_SCRIPT);
        let xlabel = format!("relative deviation of {}", table.parameter);
        fs::write(&p, gnuplot_script(SWEEP_CSV, &xlabel, table.tags.len(), &table.tags))?;
        Some(p)
    } else {
        None
    };
    Ok(Written { data, metadata, plot })
}
