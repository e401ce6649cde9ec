//! `report`: turns result JSON files into tidy, plot-ready CSV tables.
//!
//! | input            | table                 | columns |
//! |------------------|-----------------------|---------|
//! | `run.json`       | `bands.csv`           | band, eps_ks, vxc, sigma_sex_x, sigma_x, sigma_coh, sigma_total, eps_gw |
//! | `run.json`       | `singular_values.csv` | index, singular_value |
//! | `validate.json`  | `checks.csv`          | name, passed, worst, threshold, systems, detail |
//! | `validate.json`  | `k_sweep.csv`         | k, mean_abs_error, max_abs_error |
//! | `validate.json`  | `delta_sweep.csv`     | delta_rel, nodes_used, est_rel_error, sigma_max_dev, worst_ratio |
//! | `validate.json`  | `nodes_sweep.csv`     | N_lambda, est_rel_error, sigma_max_dev |
//! | `validate.json`  | `contour_decay.csv`   | system, ratio, fitted_slope, bound_slope, points |
//! | `scale.json`     | `scaling.csv`         | n_e, nv, nc, n_r, n_mu_vc, nodes_used, t_isdf, t_lowrank, t_dense |

use serde::{Deserialize, Serialize};
use serde_json::Value;
use std::path::{Path, PathBuf};

use crate::error::{CliError, Result};
use crate::output::write_csv;
use crate::run::RunResult;
use crate::scale::ScaleReport;
use crate::validate::{CheckResult, Sweeps};

pub const RESULT_FILES: [&str; 3] = ["run.json", "validate.json", "scale.json"];

#[derive(Debug, Serialize)]
struct SingularValueRow {
    index: usize,
    singular_value: f64,
}

#[derive(Debug, Serialize)]
struct NodesRow {
    #[serde(rename = "N_lambda")]
    n_lambda: usize,
    est_rel_error: f64,
    sigma_max_dev: Option<f64>,
}

#[derive(Debug, Deserialize)]
struct ValidationFile {
    checks: Vec<CheckResult>,
    sweeps: Sweeps,
}

fn schema(path: &Path, message: impl Into<String>) -> CliError {
    CliError::Schema {
        path: path.display().to_string(),
        message: message.into(),
    }
}

fn parse<T: serde::de::DeserializeOwned>(path: &Path, value: Value) -> Result<T> {
    serde_json::from_value(value).map_err(|e| schema(path, e.to_string()))
}

/// Writes the tables for one result file; returns the paths written.
pub fn report_file(path: &Path, out: &Path) -> Result<Vec<PathBuf>> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let value: Value = serde_json::from_str(&text).map_err(|e| schema(path, e.to_string()))?;
    let kind = value
        .get("kind")
        .and_then(Value::as_str)
        .ok_or_else(|| schema(path, "missing \"kind\""))?
        .to_string();
    let mut written = Vec::new();
    let mut emit = |name: &str, f: &dyn Fn(&Path) -> Result<()>| -> Result<()> {
        let p = out.join(name);
        f(&p)?;
        written.push(p);
        Ok(())
    };
    match kind.as_str() {
        "run" => {
            let run: RunResult = parse(path, value)?;
            emit("bands.csv", &|p| write_csv(p, &run.bands))?;
            let rows: Vec<SingularValueRow> = run
                .singular_values
                .iter()
                .enumerate()
                .map(|(index, &singular_value)| SingularValueRow { index, singular_value })
                .collect();
            emit("singular_values.csv", &|p| write_csv(p, &rows))?;
        }
        "validate" => {
            let v: ValidationFile = parse(path, value)?;
            emit("checks.csv", &|p| write_csv(p, &v.checks))?;
            emit("k_sweep.csv", &|p| write_csv(p, &v.sweeps.k_sweep))?;
            emit("delta_sweep.csv", &|p| write_csv(p, &v.sweeps.delta_sweep))?;
            let nodes: Vec<NodesRow> = v
                .sweeps
                .nodes_sweep
                .iter()
                .map(|r| NodesRow {
                    n_lambda: r.n_lambda,
                    est_rel_error: r.est_rel_error,
                    sigma_max_dev: r.sigma_max_dev,
                })
                .collect();
            emit("nodes_sweep.csv", &|p| write_csv(p, &nodes))?;
            emit("contour_decay.csv", &|p| write_csv(p, &v.sweeps.decay))?;
        }
        "scale" => {
            let s: ScaleReport = parse(path, value)?;
            emit("scaling.csv", &|p| write_csv(p, &s.rows))?;
        }
        other => return Err(schema(path, format!("unknown result kind {other:?}"))),
    }
    Ok(written)
}

/// `report` subcommand. With no inputs, every known result file present
/// in `out` is used.
pub fn cmd_report(inputs: &[PathBuf], out: &Path) -> Result<Vec<PathBuf>> {
    let inputs: Vec<PathBuf> = if inputs.is_empty() {
        RESULT_FILES.iter().map(|f| out.join(f)).filter(|p| p.is_file()).collect()
    } else {
        inputs.to_vec()
    };
    if inputs.is_empty() {
        return Err(CliError::Config(format!("no result files found in {}", out.display())));
    }
    for p in &inputs {
        if !p.is_file() {
            return Err(CliError::Config(format!("result file {} does not exist", p.display())));
        }
    }
    let mut written = Vec::new();
    for p in &inputs {
        written.extend(report_file(p, out)?);
    }
    Ok(written)
}
