//! Acceptance suite: one PASS/FAIL line per criterion, written straight to
//! stdout so it shows without `--nocapture`. Runs as a single test so the
//! timings are not disturbed by other tests in this binary.

use std::io::Write;
use std::time::Instant;

use lrgw_cli::validate::{self, CheckResult, Hooks, ValidationReport};
use lrgw_cli::{scale, RunConfig};

struct Criterion {
    id: u32,
    name: &'static str,
    passed: bool,
    detail: String,
}

fn say(line: &str) {
    let mut out = std::io::stdout().lock();
    let _ = writeln!(out, "{line}");
    let _ = out.flush();
}

fn check<'a>(report: &'a ValidationReport, name: &str) -> &'a CheckResult {
    report.check(name).unwrap_or_else(|| panic!("check {name} missing from report"))
}

fn summary(c: &CheckResult) -> String {
    let worst = c.worst.map_or("n/a".into(), |w| format!("{w:.3e}"));
    format!("{} worst {worst} (threshold {:.1e}, {} systems)", c.name, c.threshold, c.systems)
}

#[test]
fn acceptance_criteria() {
    let cfg = RunConfig::default();
    let mut results = Vec::new();

    let start = Instant::now();
    let report = validate::execute(&cfg, Hooks::default()).expect("validation runs");
    let elapsed = start.elapsed().as_secs_f64();

    // 1. SMW vs LU on at least five small systems, within a minute overall
    let mut specs = vec![cfg.system.spec()];
    specs.extend(cfg.validation.extra_systems.iter().cloned());
    let small = specs
        .iter()
        .all(|s| s.dims.iter().product::<usize>() <= 512 && s.nv == s.nc && s.nv <= 16);
    let smw = check(&report, "smw_vs_lu");
    results.push(Criterion {
        id: 1,
        name: "low-rank inverse matches dense LU",
        passed: smw.passed && smw.systems >= 5 && small && elapsed <= 60.0,
        detail: format!("{}; all systems N_r<=512, N_v=N_c<=16: {small}; validation took {elapsed:.1} s", summary(smw)),
    });

    // 2. contour vs direct sum, node budget and geometric decay
    let contour = check(&report, "contour_vs_direct");
    let nodes = check(&report, "contour_node_budget");
    let decay = check(&report, "contour_decay_rate");
    let ratios_ok = !report.sweeps.decay.is_empty() && report.sweeps.decay.iter().all(|d| d.ratio <= 100.0 + 1e-9);
    let slopes: Vec<String> = report
        .sweeps
        .decay
        .iter()
        .map(|d| {
            let fitted = d.fitted_slope.map_or("n/a".into(), |s| format!("{s:.3}"));
            format!("Q/q={:.1}: fitted {fitted} vs bound -{:.3}", d.ratio, d.bound_slope)
        })
        .collect();
    results.push(Criterion {
        id: 2,
        name: "contour quadrature matches direct sum",
        passed: contour.passed && nodes.passed && decay.passed && cfg.contour.delta_rel <= 1e-7 && ratios_ok,
        detail: format!(
            "{}; {}; {}; {}",
            summary(contour),
            summary(nodes),
            summary(decay),
            slopes.join(", ")
        ),
    });

    // 3. pipeline equivalence
    let pipe = check(&report, "pipeline_equivalence");
    results.push(Criterion {
        id: 3,
        name: "low-rank and conventional pipelines agree",
        passed: pipe.passed && pipe.systems == specs.len(),
        detail: summary(pipe),
    });

    // 4. ISDF convergence and sensitivity ordering
    let conv = check(&report, "isdf_convergence");
    let sens = check(&report, "isdf_sensitivity_ordering");
    let ks = &report.sweeps.k_sweep;
    let ks_ok = ks.iter().map(|r| r.k).eq([4.0, 6.0, 8.0, 10.0, 12.0]);
    let errors: Vec<String> = ks.iter().map(|r| format!("k={}: {:.2e}", r.k, r.mean_abs_error)).collect();
    let s = report.sweeps.sensitivity.as_ref().expect("sensitivity recorded");
    results.push(Criterion {
        id: 4,
        name: "ISDF error decreases with k; k_vn/k_nn dominate",
        passed: conv.passed && sens.passed && ks_ok,
        detail: format!(
            "mean |dSigma| {}; at k=6 vn/nn {:.2e} vs vc {:.2e}",
            errors.join(", "),
            s.vn_nn_reduced,
            s.vc_reduced
        ),
    });

    // 5. contour threshold insensitivity
    let insens = check(&report, "contour_insensitivity");
    let deltas_ok = report
        .sweeps
        .delta_sweep
        .iter()
        .map(|r| r.delta_rel)
        .eq([1e-2, 1e-3, 1e-4, 1e-5, 1e-6]);
    results.push(Criterion {
        id: 5,
        name: "Sigma insensitive to the contour threshold",
        passed: insens.passed && deltas_ok,
        detail: format!(
            "largest band change / ISDF deviation {} over {} thresholds (limit {:.0})",
            insens.worst.map_or("n/a".into(), |w| format!("{w:.3e}")),
            insens.systems,
            insens.threshold
        ),
    });

    // 6. ISDF error bound
    let bound = check(&report, "isdf_error_bound");
    results.push(Criterion {
        id: 6,
        name: "ISDF self-energy error within its bound",
        passed: bound.passed && bound.systems == specs.len(),
        detail: format!("{} (observed / (bound + slack))", summary(bound)),
    });

    // 7. definiteness and symmetry
    let def = check(&report, "definiteness");
    results.push(Criterion {
        id: 7,
        name: "T, K, chi, V definiteness and symmetry",
        passed: def.passed && def.systems == specs.len(),
        detail: summary(def),
    });

    // 8. scaling
    let sc = scale::execute(&cfg).expect("scaling runs");
    let doublings = sc.rows.windows(2).all(|w| w[1].n_e == 2 * w[0].n_e) && sc.rows.len() >= 5;
    let largest = sc.rows.last().expect("scale rows");
    let faster = largest.t_dense.is_some_and(|d| d > largest.t_lowrank);
    let slope_ok = sc.lowrank_slope.is_some_and(|s| s <= 3.5);
    results.push(Criterion {
        id: 8,
        name: "low-rank inversion scales at most cubically",
        passed: doublings && slope_ok && faster,
        detail: format!(
            "N_e {}..{}; low-rank exponent {}; dense exponent {}; dense/low-rank at N_e={}: {}",
            sc.rows[0].n_e,
            largest.n_e,
            sc.lowrank_slope.map_or("n/a".into(), |s| format!("{s:.2}")),
            sc.dense_slope.map_or("n/a".into(), |s| format!("{s:.2}")),
            largest.n_e,
            sc.speedup_at_largest.map_or("n/a".into(), |s| format!("{s:.2}")),
        ),
    });

    for r in &results {
        say(&format!(
            "criterion {}: {} - {} | {}",
            r.id,
            if r.passed { "PASS" } else { "FAIL" },
            r.name,
            r.detail
        ));
    }
    let failed: Vec<u32> = results.iter().filter(|r| !r.passed).map(|r| r.id).collect();
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
