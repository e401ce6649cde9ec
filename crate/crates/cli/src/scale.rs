//! `scale`: timing of the low-rank inversion stage (coupled coefficients,
//! K, projections) against the dense LU oracle over growing systems.

use lrgw::gw::{coupled_coefficients_for, project_screened_interactions, CoefficientSource};
use lrgw::isdf::IsdfSet;
use lrgw::model::{build_synthetic_system, Grid};
use lrgw::smw::{epsilon_dense_oracle, ChiSource, EpsilonInverseLowRank, DENSE_EPSILON_LIMIT};
use serde::{Deserialize, Serialize};
use std::path::Path;
use std::time::Instant;

use crate::config::{power_of_two_dims, RunConfig};
use crate::error::{CliError, Result};
use crate::output;
use crate::run::{contour_spec, coulomb_for};
use crate::validate::fit_slope;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScaleRow {
    pub n_e: usize,
    pub nv: usize,
    pub nc: usize,
    pub n_r: usize,
    pub n_mu_vc: usize,
    pub nodes_used: usize,
    /// Median seconds, ISDF construction (not part of the fit).
    pub t_isdf: f64,
    /// Median seconds, coupled coefficients + K + projections.
    pub t_lowrank: f64,
    /// Median seconds, dense χ, ε and LU inverse; absent above the guard.
    pub t_dense: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScaleReport {
    pub kind: String,
    pub repeats: usize,
    pub rows: Vec<ScaleRow>,
    /// Fitted exponent of `t_lowrank` against `N_e`.
    pub lowrank_slope: Option<f64>,
    /// Fitted exponent of `t_dense` over the sizes where it ran.
    pub dense_slope: Option<f64>,
    /// `t_dense / t_lowrank` at the largest size with both timings.
    pub speedup_at_largest: Option<f64>,
}

pub fn median(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(|a, b| a.total_cmp(b));
    let n = xs.len();
    if n % 2 == 1 {
        xs[n / 2]
    } else {
        0.5 * (xs[n / 2 - 1] + xs[n / 2])
    }
}

fn seconds<T>(f: impl FnOnce() -> Result<T>) -> Result<(T, f64)> {
    let start = Instant::now();
    let out = f()?;
    Ok((out, start.elapsed().as_secs_f64()))
}

fn measure(cfg: &RunConfig, nv: usize) -> Result<ScaleRow> {
    let n_r = nv * cfg.scale.points_per_band;
    let grid = Grid::with_spacing(power_of_two_dims(n_r), cfg.system.spacing).map_err(CliError::stage("system"))?;
    let es = build_synthetic_system(cfg.system.seed, &grid, nv, nv, cfg.system.gap, cfg.system.bandwidth)
        .map_err(CliError::stage("system"))?;
    let v = coulomb_for(&es)?;
    let spec = contour_spec(&es, &cfg.contour)?;

    let (mut t_isdf, mut t_lowrank, mut t_dense) = (Vec::new(), Vec::new(), Vec::new());
    let mut last = None;
    for _ in 0..cfg.scale.repeats {
        let (decs, dt) = seconds(|| {
            IsdfSet::build(&es, cfg.isdf.coefficients(), cfg.isdf.selector).map_err(CliError::stage("isdf"))
        })?;
        t_isdf.push(dt);
        let ((t, _), dt) = seconds(|| {
            let t = coupled_coefficients_for(&es, &decs.vc, CoefficientSource::Contour(spec))
                .map_err(CliError::stage("coupled coefficients"))?;
            let e = EpsilonInverseLowRank::new(&t, decs.vc.p.clone(), &v).map_err(CliError::stage("smw"))?;
            let proj = project_screened_interactions(&e, &decs.vn, &decs.nn, &v)
                .map_err(CliError::stage("projections"))?;
            Ok((t, proj))
        })?;
        t_lowrank.push(dt);
        if n_r <= DENSE_EPSILON_LIMIT {
            let (_, dt) = seconds(|| {
                epsilon_dense_oracle(&v, ChiSource::Isdf { p: &decs.vc.p, t: &t.t })
                    .map_err(CliError::stage("dense oracle"))
            })?;
            t_dense.push(dt);
        }
        last = Some((decs.vc.n_mu, t.nodes_used));
    }
    let (n_mu_vc, nodes_used) = last.expect("at least one repeat");
    Ok(ScaleRow {
        n_e: 2 * nv,
        nv,
        nc: nv,
        n_r,
        n_mu_vc,
        nodes_used,
        t_isdf: median(t_isdf),
        t_lowrank: median(t_lowrank),
        t_dense: (!t_dense.is_empty()).then(|| median(t_dense)),
    })
}

fn log_slope(points: &[(usize, f64)]) -> Option<f64> {
    if points.len() < 2 {
        return None;
    }
    let x: Vec<f64> = points.iter().map(|(n, _)| (*n as f64).ln()).collect();
    let y: Vec<f64> = points.iter().map(|(_, t)| t.max(1e-9).ln()).collect();
    Some(fit_slope(&x, &y))
}

/// Times every configured size and fits log-log slopes.
pub fn execute(cfg: &RunConfig) -> Result<ScaleReport> {
    cfg.scale.check()?;
    let rows = cfg
        .scale
        .sizes
        .iter()
        .map(|&nv| measure(cfg, nv))
        .collect::<Result<Vec<_>>>()?;
    let lowrank: Vec<(usize, f64)> = rows.iter().map(|r| (r.n_e, r.t_lowrank)).collect();
    let dense: Vec<(usize, f64)> = rows.iter().filter_map(|r| r.t_dense.map(|t| (r.n_e, t))).collect();
    let speedup_at_largest = rows
        .iter()
        .rev()
        .find_map(|r| r.t_dense.map(|d| d / r.t_lowrank.max(1e-9)));
    Ok(ScaleReport {
        kind: "scale".into(),
        repeats: cfg.scale.repeats,
        lowrank_slope: log_slope(&lowrank),
        dense_slope: log_slope(&dense),
        speedup_at_largest,
        rows,
    })
}

/// `scale` subcommand: writes `scale.json` and `scale.csv`.
pub fn cmd_scale(cfg: &RunConfig, out: &Path) -> Result<ScaleReport> {
    let report = execute(cfg)?;
    output::write_json(&out.join("scale.json"), &report)?;
    output::write_csv(&out.join("scale.csv"), &report.rows)?;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn medians() {
        assert_eq!(median(vec![3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(vec![4.0, 1.0, 2.0, 3.0]), 2.5);
    }

    #[test]
    fn cubic_fit() {
        let pts: Vec<(usize, f64)> = [4usize, 8, 16, 32].iter().map(|&n| (n, 1e-6 * (n as f64).powi(3))).collect();
        assert!((log_slope(&pts).unwrap() - 3.0).abs() < 1e-12);
        assert!(log_slope(&pts[..1]).is_none());
    }
}
