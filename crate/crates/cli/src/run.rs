//! `run`: build → ISDF → coupled coefficients → K → projections → Σ → ε_GW.

use lrgw::contour::{cauchy_error_bound, elliptic_params, ContourSpec};
use lrgw::gw::{
    coupled_coefficients_for, project_screened_interactions, quasiparticle_energies, self_energies_bruteforce,
    self_energies_isdf_conventional, self_energies_lowrank, CoefficientSource, PipelineTag, SelfEnergies,
};
use lrgw::isdf::{singular_value_report, IsdfSet};
use lrgw::model::{build_coulomb, CoulombMode, CoulombOperator, ElectronicStructure};
use lrgw::smw::EpsilonInverseLowRank;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::Path;
use std::time::Instant;

use crate::config::{ContourConfig, RunConfig};
use crate::error::{CliError, Result};
use crate::output;

/// Leading singular values of `M_vc` kept in the run result.
const SINGULAR_VALUES_KEPT: usize = 64;

/// Wall-clock seconds per stage.
pub type Timings = BTreeMap<String, f64>;

pub fn timed<T>(timings: &mut Timings, stage: &str, f: impl FnOnce() -> Result<T>) -> Result<T> {
    let start = Instant::now();
    let out = f()?;
    *timings.entry(stage.to_string()).or_default() += start.elapsed().as_secs_f64();
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandRow {
    pub band: usize,
    pub eps_ks: f64,
    pub vxc: f64,
    pub sigma_sex_x: f64,
    pub sigma_x: f64,
    pub sigma_coh: f64,
    pub sigma_total: f64,
    pub eps_gw: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemSummary {
    pub source: String,
    pub n_r: usize,
    pub nv: usize,
    pub nc: usize,
    pub gap: f64,
    pub max_transition: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IsdfSummary {
    pub k_vc: f64,
    pub k_vn: f64,
    pub k_nn: f64,
    pub n_mu_vc: usize,
    pub n_mu_vn: usize,
    pub n_mu_nn: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContourSummary {
    pub q: f64,
    pub big_q: f64,
    pub modulus: f64,
    pub height: f64,
    pub delta_rel: f64,
    pub bypass: bool,
    pub nodes_used: usize,
    pub est_rel_error: f64,
    /// Theoretical quadrature error bound at `nodes_used`.
    pub error_bound: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub kind: String,
    pub pipeline: PipelineTag,
    pub system: SystemSummary,
    pub isdf: Option<IsdfSummary>,
    pub contour: Option<ContourSummary>,
    pub bands: Vec<BandRow>,
    /// Leading singular values of the vc pair matrix, descending.
    pub singular_values: Vec<f64>,
    pub timings: Timings,
}

pub fn coulomb_for(es: &ElectronicStructure) -> Result<CoulombOperator> {
    build_coulomb(&es.grid, CoulombMode::ReciprocalDiagonal).map_err(CliError::stage("coulomb"))
}

pub fn contour_spec(es: &ElectronicStructure, c: &ContourConfig) -> Result<ContourSpec> {
    let e = es.energies.as_slice().expect("contiguous energies");
    Ok(elliptic_params(e, es.nv, es.nc, c.delta_rel)
        .map_err(CliError::stage("contour"))?
        .with_max_nodes(c.max_nodes))
}

/// The low-rank pipeline stage by stage, with timings.
pub struct LowRankRun {
    pub sigma: SelfEnergies,
    pub nodes_used: usize,
    pub est_rel_error: f64,
    pub epsilon_inverse: EpsilonInverseLowRank,
}

pub fn lowrank_stages(
    es: &ElectronicStructure,
    v: &CoulombOperator,
    decs: &IsdfSet,
    source: CoefficientSource,
    timings: &mut Timings,
) -> Result<LowRankRun> {
    let t = timed(timings, "coupled_coefficients", || {
        coupled_coefficients_for(es, &decs.vc, source).map_err(CliError::stage("coupled coefficients"))
    })?;
    let e = timed(timings, "smw", || {
        EpsilonInverseLowRank::new(&t, decs.vc.p.clone(), v).map_err(CliError::stage("smw"))
    })?;
    let proj = timed(timings, "projections", || {
        project_screened_interactions(&e, &decs.vn, &decs.nn, v).map_err(CliError::stage("projections"))
    })?;
    let sigma = timed(timings, "self_energies", || {
        self_energies_lowrank(es, &proj, &decs.vn, &decs.nn).map_err(CliError::stage("self-energies"))
    })?;
    Ok(LowRankRun {
        sigma,
        nodes_used: t.nodes_used,
        est_rel_error: t.est_rel_error,
        epsilon_inverse: e,
    })
}

pub fn band_rows(es: &ElectronicStructure, sigma: &SelfEnergies) -> Result<Vec<BandRow>> {
    let qp = quasiparticle_energies(es, sigma).map_err(CliError::stage("quasiparticle energies"))?;
    Ok((0..es.n_bands())
        .map(|n| BandRow {
            band: n,
            eps_ks: es.energies[n],
            vxc: es.vxc[n],
            sigma_sex_x: sigma.sigma_sex_x[n],
            sigma_x: sigma.sigma_x[n],
            sigma_coh: sigma.sigma_coh[n],
            sigma_total: sigma.sigma_total[n],
            eps_gw: qp.eps_gw[n],
        })
        .collect())
}

fn system_summary(cfg: &RunConfig, es: &ElectronicStructure) -> SystemSummary {
    let source = match &cfg.system.wfn {
        Some(p) => format!("wfn:{}", p.display()),
        None => format!("synthetic:seed={}", cfg.system.seed),
    };
    SystemSummary {
        source,
        n_r: es.n_r(),
        nv: es.nv,
        nc: es.nc,
        gap: es.gap(),
        max_transition: es.max_transition(),
    }
}

/// Runs the configured pipeline on the configured system.
pub fn execute(cfg: &RunConfig) -> Result<RunResult> {
    let mut timings = Timings::new();
    let es = timed(&mut timings, "system", || cfg.system.build())?;
    let v = coulomb_for(&es)?;

    let build_isdf = |timings: &mut Timings| {
        timed(timings, "isdf", || {
            IsdfSet::build(&es, cfg.isdf.coefficients(), cfg.isdf.selector).map_err(CliError::stage("isdf"))
        })
    };
    let isdf_summary = |decs: &IsdfSet| IsdfSummary {
        k_vc: cfg.isdf.k_vc,
        k_vn: cfg.isdf.k_vn,
        k_nn: cfg.isdf.k_nn,
        n_mu_vc: decs.vc.n_mu,
        n_mu_vn: decs.vn.n_mu,
        n_mu_nn: decs.nn.n_mu,
    };

    let (sigma, isdf, contour) = match cfg.pipeline {
        PipelineTag::Lowrank => {
            let decs = build_isdf(&mut timings)?;
            let spec = contour_spec(&es, &cfg.contour)?;
            let run = lowrank_stages(&es, &v, &decs, CoefficientSource::Contour(spec), &mut timings)?;
            let contour = ContourSummary {
                q: spec.q,
                big_q: spec.big_q,
                modulus: spec.r,
                height: spec.big_l,
                delta_rel: spec.delta_rel,
                bypass: spec.bypass,
                nodes_used: run.nodes_used,
                est_rel_error: run.est_rel_error,
                error_bound: if spec.bypass {
                    0.0
                } else {
                    cauchy_error_bound(&spec, run.nodes_used)
                },
            };
            (run.sigma, Some(isdf_summary(&decs)), Some(contour))
        }
        PipelineTag::IsdfConventional => {
            let decs = build_isdf(&mut timings)?;
            let sigma = timed(&mut timings, "self_energies", || {
                self_energies_isdf_conventional(&es, &v, &decs).map_err(CliError::stage("self-energies"))
            })?;
            (sigma, Some(isdf_summary(&decs)), None)
        }
        PipelineTag::Bruteforce => {
            let sigma = timed(&mut timings, "self_energies", || {
                self_energies_bruteforce(&es, &v).map_err(CliError::stage("self-energies"))
            })?;
            (sigma, None, None)
        }
    };

    let singular_values = timed(&mut timings, "singular_values", || {
        match singular_value_report(&es.occupied(), &es.unoccupied(), SINGULAR_VALUES_KEPT) {
            Ok(s) => Ok(s.to_vec()),
            Err(lrgw::Error::DenseGuard { .. }) => Ok(Vec::new()),
            Err(e) => Err(CliError::stage("singular values")(e)),
        }
    })?;

    Ok(RunResult {
        kind: "run".into(),
        pipeline: sigma.pipeline,
        system: system_summary(cfg, &es),
        isdf,
        contour,
        bands: band_rows(&es, &sigma)?,
        singular_values,
        timings,
    })
}

/// `run` subcommand: writes `run.json` and `bands.csv` into `out`.
pub fn cmd_run(cfg: &RunConfig, out: &Path) -> Result<RunResult> {
    let result = execute(cfg)?;
    output::write_json(&out.join("run.json"), &result)?;
    output::write_csv(&out.join("bands.csv"), &result.bands)?;
    Ok(result)
}
