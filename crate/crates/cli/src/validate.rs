//! `validate`: every oracle comparison, on the main system and the extra
//! validation systems, with one machine-readable verdict per check.

use lrgw::contour::{coupled_coefficients_fixed, CoupledCoefficients};
use lrgw::gw::{
    coupled_coefficients_for, isdf_error_bound_check, self_energies_bruteforce, self_energies_isdf_conventional,
    CoefficientSource, SelfEnergies,
};
use lrgw::isdf::{IsdfCoefficients, IsdfSet};
use lrgw::linalg::{frobenius, rel_diff, sym_eig, symmetry_defect};
use lrgw::model::{CoulombOperator, ElectronicStructure};
use lrgw::smw::{dense_chi, epsilon_dense_oracle, ChiSource};
use serde::{Deserialize, Serialize};
use std::path::Path;

use crate::config::{RunConfig, SystemSpec};
use crate::error::{CliError, ErrorReport, Result};
use crate::output;
use crate::run::{contour_spec, coulomb_for, lowrank_stages, timed, Timings};

pub const SMW_TOL: f64 = 1e-10;
pub const PIPELINE_TOL: f64 = 1e-9;
/// Largest node count the contour may need at the configured threshold.
pub const CONTOUR_NODE_LIMIT: usize = 1025;
/// Fitted decay rate must reach this fraction of the theoretical one.
pub const DECAY_SLOPE_FRACTION: f64 = 0.5;
/// Quadrature errors below this are roundoff and excluded from the fit.
pub const DECAY_FLOOR: f64 = 1e-11;
/// Allowed growth of the mean self-energy error per step of the k sweep.
pub const K_SWEEP_SLACK: f64 = 0.05;
pub const INSENSITIVITY_FACTOR: f64 = 10.0;
pub const SYMMETRY_TOL: f64 = 1e-10;
pub const CHI_TOL: f64 = 1e-10;
pub const COULOMB_PSD_TOL: f64 = 1e-12;
/// ISDF coefficient used for the sensitivity comparison.
pub const SENSITIVITY_K: f64 = 6.0;

/// Mutation hooks for testing that validation catches defects.
#[derive(Debug, Clone, Copy, Default)]
pub struct Hooks {
    /// Flip the sign of the low-rank screened-exchange term.
    pub flip_sex_sign: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    /// Worst observed value of the checked quantity (largest, or smallest
    /// for lower-bounded checks); absent when nothing finite was recorded.
    pub worst: Option<f64>,
    pub threshold: f64,
    pub systems: usize,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KSweepRow {
    pub k: f64,
    pub mean_abs_error: f64,
    pub max_abs_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeltaSweepRow {
    pub delta_rel: f64,
    pub nodes_used: usize,
    pub est_rel_error: f64,
    /// Largest band change relative to the exact-coefficient result.
    pub sigma_max_dev: f64,
    /// Largest per-band ratio of that change to the ISDF error.
    pub worst_ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodesSweepRow {
    #[serde(rename = "N_lambda")]
    pub n_lambda: usize,
    /// Relative error of the coupled coefficients against the direct sum.
    pub est_rel_error: f64,
    /// Largest band change of Σ relative to the direct-sum result (absent
    /// when the coefficients are too inaccurate to be definite).
    pub sigma_max_dev: Option<f64>,
    pub error_bound: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    pub system: usize,
    pub ratio: f64,
    /// Absent when fewer than two nodes counts are above the error floor.
    pub fitted_slope: Option<f64>,
    pub bound_slope: f64,
    pub points: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sensitivity {
    pub k: f64,
    /// Mean error with `k_vn = k_nn = k`, `k_vc` at its configured value.
    pub vn_nn_reduced: f64,
    /// Mean error with `k_vc = k`, `k_vn`, `k_nn` at their configured values.
    pub vc_reduced: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Sweeps {
    pub k_sweep: Vec<KSweepRow>,
    pub sensitivity: Option<Sensitivity>,
    pub delta_sweep: Vec<DeltaSweepRow>,
    pub nodes_sweep: Vec<NodesSweepRow>,
    pub decay: Vec<DecayFit>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ValidationReport {
    pub kind: String,
    pub passed: bool,
    pub checks: Vec<CheckResult>,
    pub sweeps: Sweeps,
    pub precondition_error: Option<ErrorReport>,
    pub timings: Timings,
}

impl ValidationReport {
    pub fn check(&self, name: &str) -> Option<&CheckResult> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn failed(&self) -> Vec<&str> {
        self.checks.iter().filter(|c| !c.passed).map(|c| c.name.as_str()).collect()
    }
}

/// Running worst case of one check over the validation systems.
struct Tally {
    name: &'static str,
    threshold: f64,
    lower_is_worse: bool,
    worst: Option<f64>,
    passed: bool,
    systems: usize,
    notes: Vec<String>,
}

impl Tally {
    fn new(name: &'static str, threshold: f64) -> Self {
        Self {
            name,
            threshold,
            lower_is_worse: false,
            worst: None,
            passed: true,
            systems: 0,
            notes: Vec::new(),
        }
    }

    fn lower_bounded(mut self) -> Self {
        self.lower_is_worse = true;
        self
    }

    fn record(&mut self, system: usize, value: f64, ok: bool) {
        self.systems += 1;
        let worse = match self.worst {
            None => true,
            Some(w) if self.lower_is_worse => value < w,
            Some(w) => value > w,
        };
        if !value.is_nan() && worse {
            self.worst = Some(value);
        }
        if !ok || value.is_nan() {
            self.passed = false;
            self.notes.push(format!("system {system}: {value:e}"));
        }
    }

    fn note(&mut self, text: String) {
        self.notes.push(text);
    }

    fn finish(self) -> CheckResult {
        CheckResult {
            name: self.name.to_string(),
            passed: self.passed && self.systems > 0,
            worst: self.worst,
            threshold: self.threshold,
            systems: self.systems,
            detail: if self.systems == 0 {
                "no system evaluated".into()
            } else {
                self.notes.join("; ")
            },
        }
    }
}

fn max_abs_diff(a: &SelfEnergies, b: &SelfEnergies) -> f64 {
    a.sigma_total
        .iter()
        .zip(&b.sigma_total)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

fn mean_abs_diff(a: &SelfEnergies, b: &SelfEnergies) -> f64 {
    let n = a.sigma_total.len() as f64;
    a.sigma_total.iter().zip(&b.sigma_total).map(|(x, y)| (x - y).abs()).sum::<f64>() / n
}

/// Largest per-band relative difference over all three components.
pub fn max_band_rel(a: &SelfEnergies, b: &SelfEnergies) -> f64 {
    let pairs = [
        (&a.sigma_sex_x, &b.sigma_sex_x),
        (&a.sigma_x, &b.sigma_x),
        (&a.sigma_coh, &b.sigma_coh),
        (&a.sigma_total, &b.sigma_total),
    ];
    pairs
        .iter()
        .flat_map(|(x, y)| x.iter().zip(y.iter()))
        .map(|(x, y)| (x - y).abs() / y.abs().max(f64::MIN_POSITIVE))
        .fold(0.0, f64::max)
}

/// Least-squares slope of `y` against `x`.
pub fn fit_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

fn negative_definite(a: &ndarray::Array2<f64>) -> Result<(f64, f64)> {
    let eig = sym_eig(&a.view()).map_err(CliError::stage("definiteness"))?;
    let sym = symmetry_defect(&a.view()) / frobenius(&a.view()).max(f64::MIN_POSITIVE);
    Ok((eig.max(), sym))
}

struct Context<'a> {
    cfg: &'a RunConfig,
    hooks: Hooks,
    timings: &'a mut Timings,
}

struct Tallies {
    smw: Tally,
    contour: Tally,
    contour_nodes: Tally,
    decay: Tally,
    pipeline: Tally,
    bound: Tally,
    definiteness: Tally,
}

impl Tallies {
    fn new(cfg: &RunConfig) -> Self {
        Self {
            smw: Tally::new("smw_vs_lu", SMW_TOL),
            contour: Tally::new("contour_vs_direct", cfg.contour.delta_rel),
            contour_nodes: Tally::new("contour_node_budget", CONTOUR_NODE_LIMIT as f64),
            decay: Tally::new("contour_decay_rate", DECAY_SLOPE_FRACTION).lower_bounded(),
            pipeline: Tally::new("pipeline_equivalence", PIPELINE_TOL),
            bound: Tally::new("isdf_error_bound", 1.0),
            definiteness: Tally::new("definiteness", SYMMETRY_TOL),
        }
    }
}

/// Per-system checks; returns the ISDF set, the exact-coefficient low-rank
/// Σ and the brute-force Σ for reuse by the sweeps.
fn check_system(
    ctx: &mut Context<'_>,
    id: usize,
    es: &ElectronicStructure,
    v: &CoulombOperator,
    tallies: &mut Tallies,
    sweeps: &mut Sweeps,
) -> Result<(IsdfSet, SelfEnergies, SelfEnergies)> {
    let cfg = ctx.cfg;
    let decs = timed(ctx.timings, "isdf", || {
        IsdfSet::build(es, cfg.isdf.coefficients(), cfg.isdf.selector).map_err(CliError::stage("isdf"))
    })?;

    // coupled coefficients: contour vs direct sum, decay rate
    let direct = coupled_coefficients_for(es, &decs.vc, CoefficientSource::Direct)
        .map_err(CliError::stage("coupled coefficients"))?;
    let spec = contour_spec(es, &cfg.contour)?;
    let contour = timed(ctx.timings, "contour", || {
        coupled_coefficients_for(es, &decs.vc, CoefficientSource::Contour(spec))
            .map_err(CliError::stage("coupled coefficients"))
    })?;
    let diff = rel_diff(&contour.t.view(), &direct.t.view());
    tallies.contour.record(id, diff, diff <= cfg.contour.delta_rel);
    let nodes = contour.nodes_used as f64;
    tallies.contour_nodes.record(id, nodes, contour.nodes_used <= CONTOUR_NODE_LIMIT);
    if !spec.bypass {
        let fit = decay_fit(id, es, &decs, &direct, cfg)?;
        let ratio = fit.fitted_slope.map_or(f64::NAN, |s| -s / fit.bound_slope);
        tallies.decay.record(id, ratio, ratio >= DECAY_SLOPE_FRACTION);
        sweeps.decay.push(fit);
    } else {
        tallies.decay.note(format!("system {id}: contour bypassed"));
    }

    // SMW vs dense LU of the same ε
    let lr = lowrank_stages(es, v, &decs, CoefficientSource::Direct, ctx.timings)?;
    let dense = timed(ctx.timings, "dense_oracle", || {
        epsilon_dense_oracle(v, ChiSource::Isdf { p: &decs.vc.p, t: &direct.t }).map_err(CliError::stage("dense oracle"))
    })?;
    let lowrank_matrix = lr.epsilon_inverse.materialize().map_err(CliError::stage("smw"))?;
    let d = rel_diff(&lowrank_matrix.view(), &dense.1.view());
    tallies.smw.record(id, d, d <= SMW_TOL);

    // pipeline equivalence
    let mut sigma_lr = lr.sigma.clone();
    if ctx.hooks.flip_sex_sign {
        sigma_lr = SelfEnergies::new(
            -&sigma_lr.sigma_sex_x,
            sigma_lr.sigma_x.clone(),
            sigma_lr.sigma_coh.clone(),
            sigma_lr.pipeline,
        )
        .map_err(CliError::stage("self-energies"))?;
    }
    let conv = timed(ctx.timings, "isdf_conventional", || {
        self_energies_isdf_conventional(es, v, &decs).map_err(CliError::stage("isdf-conventional pipeline"))
    })?;
    let p = max_band_rel(&sigma_lr, &conv);
    tallies.pipeline.record(id, p, p <= PIPELINE_TOL);

    // error bound
    let exact = timed(ctx.timings, "bruteforce", || {
        self_energies_bruteforce(es, v).map_err(CliError::stage("brute-force pipeline"))
    })?;
    let bound = timed(ctx.timings, "error_bound", || {
        isdf_error_bound_check(es, v, &decs).map_err(CliError::stage("error bound"))
    })?;
    let worst = bound
        .bands
        .iter()
        .map(|b| {
            let allowed = b.bound + b.slack;
            if allowed > 0.0 {
                b.observed / allowed
            } else if b.observed == 0.0 {
                0.0
            } else {
                f64::INFINITY
            }
        })
        .fold(0.0, f64::max);
    tallies.bound.record(id, worst, bound.all_hold());

    // definiteness and symmetry
    let (t_max, t_sym) = negative_definite(&direct.t)?;
    let (k_max, k_sym) = negative_definite(&lr.epsilon_inverse.k)?;
    let chi = dense_chi(ChiSource::Isdf { p: &decs.vc.p, t: &direct.t }).map_err(CliError::stage("definiteness"))?;
    let chi_max = sym_eig(&chi.view()).map_err(CliError::stage("definiteness"))?.max();
    let vd = v.materialize().map_err(CliError::stage("definiteness"))?;
    let v_min = sym_eig(&vd.view()).map_err(CliError::stage("definiteness"))?.min();
    let sym = t_sym.max(k_sym);
    let ok = t_max < 0.0 && k_max < 0.0 && chi_max <= CHI_TOL && v_min >= -COULOMB_PSD_TOL && sym <= SYMMETRY_TOL;
    if !ok {
        tallies.definiteness.note(format!(
            "system {id}: max eig T {t_max:e}, K {k_max:e}, chi {chi_max:e}; min eig V {v_min:e}"
        ));
    }
    tallies.definiteness.record(id, sym, ok);

    Ok((decs, lr.sigma, exact))
}

fn decay_fit(
    id: usize,
    es: &ElectronicStructure,
    decs: &IsdfSet,
    direct: &CoupledCoefficients,
    cfg: &RunConfig,
) -> Result<DecayFit> {
    let spec = contour_spec(es, &cfg.contour)?;
    let pv = decs.vc.sample(&es.occupied());
    let pc = decs.vc.sample(&es.unoccupied());
    let e = es.energies.as_slice().expect("contiguous energies");
    let (mut xs, mut ys) = (Vec::new(), Vec::new());
    for &n in &cfg.validation.nodes_sweep {
        let t = coupled_coefficients_fixed(&pv.view(), &pc.view(), e, &spec, n)
            .map_err(CliError::stage("coupled coefficients"))?;
        let err = rel_diff(&t.view(), &direct.t.view());
        if err > DECAY_FLOOR {
            xs.push(n as f64);
            ys.push(err.ln());
        }
    }
    let ratio = spec.big_q / spec.q;
    let bound_slope = std::f64::consts::PI.powi(2) / (2.0 * ratio.ln() + 6.0);
    let fitted_slope = (xs.len() >= 2).then(|| fit_slope(&xs, &ys));
    Ok(DecayFit {
        system: id,
        ratio,
        fitted_slope,
        bound_slope,
        points: xs.len(),
    })
}

fn main_system_sweeps(
    ctx: &mut Context<'_>,
    es: &ElectronicStructure,
    v: &CoulombOperator,
    decs: &IsdfSet,
    sigma_direct: &SelfEnergies,
    exact: &SelfEnergies,
    sweeps: &mut Sweeps,
) -> Result<Vec<CheckResult>> {
    let cfg = ctx.cfg;
    let mut scratch = Timings::new();
    let mut lowrank_error = |k: IsdfCoefficients, timings: &mut Timings| -> Result<SelfEnergies> {
        let d = timed(timings, "isdf", || {
            IsdfSet::build(es, k, cfg.isdf.selector).map_err(CliError::stage("isdf"))
        })?;
        Ok(lowrank_stages(es, v, &d, CoefficientSource::Direct, &mut scratch)?.sigma)
    };

    // ISDF convergence along k
    let mut k_check = Tally::new("isdf_convergence", K_SWEEP_SLACK);
    for &k in &cfg.validation.k_sweep {
        let s = lowrank_error(IsdfCoefficients::uniform(k), ctx.timings)?;
        sweeps.k_sweep.push(KSweepRow {
            k,
            mean_abs_error: mean_abs_diff(&s, exact),
            max_abs_error: max_abs_diff(&s, exact),
        });
    }
    for (step, w) in sweeps.k_sweep.windows(2).enumerate() {
        let growth = w[1].mean_abs_error / w[0].mean_abs_error - 1.0;
        k_check.record(step, growth, w[1].mean_abs_error <= (1.0 + K_SWEEP_SLACK) * w[0].mean_abs_error);
    }

    // sensitivity to k_vn/k_nn vs k_vc
    let base = cfg.isdf.coefficients();
    let vn_nn = lowrank_error(
        IsdfCoefficients {
            k_vn: SENSITIVITY_K,
            k_nn: SENSITIVITY_K,
            ..base
        },
        ctx.timings,
    )?;
    let vc = lowrank_error(
        IsdfCoefficients {
            k_vc: SENSITIVITY_K,
            ..base
        },
        ctx.timings,
    )?;
    let sens = Sensitivity {
        k: SENSITIVITY_K,
        vn_nn_reduced: mean_abs_diff(&vn_nn, exact),
        vc_reduced: mean_abs_diff(&vc, exact),
    };
    let mut sens_check = Tally::new("isdf_sensitivity_ordering", 1.0);
    sens_check.record(0, sens.vc_reduced / sens.vn_nn_reduced, sens.vn_nn_reduced > sens.vc_reduced);
    sweeps.sensitivity = Some(sens);

    // contour threshold insensitivity
    let isdf_dev: Vec<f64> = sigma_direct
        .sigma_total
        .iter()
        .zip(&exact.sigma_total)
        .map(|(a, b)| (a - b).abs())
        .collect();
    let mut insens = Tally::new("contour_insensitivity", INSENSITIVITY_FACTOR);
    for &delta in &cfg.validation.delta_sweep {
        let mut c = cfg.contour;
        c.delta_rel = delta;
        let spec = contour_spec(es, &c)?;
        let run = lowrank_stages(es, v, decs, CoefficientSource::Contour(spec), &mut scratch)?;
        let changes: Vec<f64> = run
            .sigma
            .sigma_total
            .iter()
            .zip(&sigma_direct.sigma_total)
            .map(|(a, b)| (a - b).abs())
            .collect();
        let ok = changes.iter().zip(&isdf_dev).all(|(c, d)| *c <= INSENSITIVITY_FACTOR * d);
        let worst_ratio = changes
            .iter()
            .zip(&isdf_dev)
            .map(|(c, d)| if *c == 0.0 { 0.0 } else { c / d.max(f64::MIN_POSITIVE) })
            .fold(0.0, f64::max);
        insens.record(sweeps.delta_sweep.len(), worst_ratio, ok);
        sweeps.delta_sweep.push(DeltaSweepRow {
            delta_rel: delta,
            nodes_used: run.nodes_used,
            est_rel_error: run.est_rel_error,
            sigma_max_dev: changes.iter().copied().fold(0.0, f64::max),
            worst_ratio,
        });
    }

    // Σ against quadrature nodes
    let spec = contour_spec(es, &cfg.contour)?;
    if !spec.bypass {
        let direct = coupled_coefficients_for(es, &decs.vc, CoefficientSource::Direct)
            .map_err(CliError::stage("coupled coefficients"))?;
        for &n in &cfg.validation.nodes_sweep {
            let t = coupled_coefficients_for(es, &decs.vc, CoefficientSource::Fixed(spec, n))
                .map_err(CliError::stage("coupled coefficients"))?;
            let sigma_max_dev = lowrank_stages(es, v, decs, CoefficientSource::Fixed(spec, n), &mut scratch)
                .ok()
                .map(|r| max_abs_diff(&r.sigma, sigma_direct));
            sweeps.nodes_sweep.push(NodesSweepRow {
                n_lambda: n,
                est_rel_error: rel_diff(&t.t.view(), &direct.t.view()),
                sigma_max_dev,
                error_bound: lrgw::contour::cauchy_error_bound(&spec, n),
            });
        }
    }

    Ok(vec![k_check.finish(), sens_check.finish(), insens.finish()])
}

/// Runs every check. `Err` only for configuration or precondition
/// problems; failed checks are reported in the result.
pub fn execute(cfg: &RunConfig, hooks: Hooks) -> Result<ValidationReport> {
    let mut timings = Timings::new();
    let mut sweeps = Sweeps::default();
    let mut tallies = Tallies::new(cfg);

    let main = timed(&mut timings, "system", || cfg.system.build())?;
    let mut systems = vec![main];
    for s in &cfg.validation.extra_systems {
        systems.push(timed(&mut timings, "system", || SystemSpec::build(s))?);
    }

    let mut ctx = Context {
        cfg,
        hooks,
        timings: &mut timings,
    };
    let mut sweep_checks = Vec::new();
    for (id, es) in systems.iter().enumerate() {
        let v = coulomb_for(es)?;
        let (decs, sigma_direct, exact) = check_system(&mut ctx, id, es, &v, &mut tallies, &mut sweeps)?;
        if id == 0 {
            sweep_checks = main_system_sweeps(&mut ctx, es, &v, &decs, &sigma_direct, &exact, &mut sweeps)?;
        }
    }

    let mut checks = vec![
        tallies.smw.finish(),
        tallies.contour.finish(),
        tallies.contour_nodes.finish(),
        tallies.decay.finish(),
        tallies.pipeline.finish(),
    ];
    checks.extend(sweep_checks);
    checks.push(tallies.bound.finish());
    checks.push(tallies.definiteness.finish());
    Ok(ValidationReport {
        kind: "validate".into(),
        passed: checks.iter().all(|c| c.passed),
        checks,
        sweeps,
        precondition_error: None,
        timings,
    })
}

/// `validate` subcommand: writes `validate.json` (also when a
/// precondition fails, in which case the error is returned afterwards).
pub fn cmd_validate(cfg: &RunConfig, hooks: Hooks, out: &Path) -> Result<ValidationReport> {
    match execute(cfg, hooks) {
        Ok(report) => {
            output::write_json(&out.join("validate.json"), &report)?;
            Ok(report)
        }
        Err(err @ CliError::Precondition { .. }) => {
            let report = ValidationReport {
                kind: "validate".into(),
                passed: false,
                checks: Vec::new(),
                sweeps: Sweeps::default(),
                precondition_error: Some(err.to_report()),
                timings: Timings::new(),
            };
            output::write_json(&out.join("validate.json"), &report)?;
            Err(err)
        }
        Err(err) => Err(err),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slope_of_a_line() {
        let x = [1.0, 2.0, 4.0, 8.0];
        let y: Vec<f64> = x.iter().map(|v| 3.0 - 0.5 * v).collect();
        assert!((fit_slope(&x, &y) + 0.5).abs() < 1e-14);
    }

    #[test]
    fn tally_tracks_worst_and_failures() {
        let mut t = Tally::new("x", 1.0);
        t.record(0, 0.5, true);
        t.record(1, 2.0, false);
        t.record(2, 0.1, true);
        let r = t.finish();
        assert!(!r.passed);
        assert_eq!(r.worst, Some(2.0));
        assert_eq!(r.systems, 3);
        assert!(r.detail.contains("system 1"));
        let empty = Tally::new("empty", 1.0).finish();
        assert!(!empty.passed);
        assert_eq!(empty.worst, None);

        let mut low = Tally::new("low", 0.5).lower_bounded();
        low.record(0, 0.9, true);
        low.record(1, f64::NAN, false);
        low.record(2, 0.7, true);
        let r = low.finish();
        assert_eq!(r.worst, Some(0.7));
        assert!(!r.passed);
    }
}
