//! Static COHSEX self-energies.
//!
//! For band `n`, with pair densities `ρ_{in} = ψ_i ⊙ ψ_n` and the screened
//! part of the interaction `W_V = (ε⁻¹ − I)·V`:
//!
//! ```text
//! Σ_X(n)     = −Σ_{i occ} ρ_{in}ᵀ·V·ρ_{in}
//! Σ_SEX_X(n) = −Σ_{i occ} ρ_{in}ᵀ·W_V·ρ_{in}
//! Σ_COH(n)   = ½·Σ_{m all} ρ_{mn}ᵀ·W_V·ρ_{mn}
//! ```
//!
//! Three pipelines evaluate these: the low-rank one (`ε⁻¹` never formed),
//! the ISDF-conventional one (dense `ε⁻¹` from the same ISDF factors) and
//! the brute-force one (exact pair matrices, no ISDF). The latter two are
//! oracles for the first.

use ndarray::{Array1, Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::contour::{
    coupled_coefficients, coupled_coefficients_direct, coupled_coefficients_fixed, ContourSpec, CoupledCoefficients,
};
use crate::error::{check_dim, Error, Result};
use crate::isdf::{pair_matrix, IsdfDecomposition, IsdfSet};
use crate::linalg::{frobenius, lu_invert, sym_eig, symmetrize};
use crate::model::{CoulombOperator, ElectronicStructure};
use crate::smw::{chi_from_pairs, dense_chi, ChiSource, EpsilonInverseLowRank};

/// Largest grid the brute-force pipeline accepts.
pub const BRUTEFORCE_LIMIT: usize = 512;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PipelineTag {
    Lowrank,
    IsdfConventional,
    Bruteforce,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelfEnergies {
    pub sigma_sex_x: Array1<f64>,
    pub sigma_x: Array1<f64>,
    pub sigma_coh: Array1<f64>,
    pub sigma_total: Array1<f64>,
    pub pipeline: PipelineTag,
}

impl SelfEnergies {
    pub fn new(
        sigma_sex_x: Array1<f64>,
        sigma_x: Array1<f64>,
        sigma_coh: Array1<f64>,
        pipeline: PipelineTag,
    ) -> Result<Self> {
        let n = sigma_x.len();
        check_dim("sigma_sex_x length", n, sigma_sex_x.len())?;
        check_dim("sigma_coh length", n, sigma_coh.len())?;
        let sigma_total = &sigma_sex_x + &sigma_x + &sigma_coh;
        if sigma_total.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("non-finite self-energy".into()));
        }
        Ok(Self {
            sigma_sex_x,
            sigma_x,
            sigma_coh,
            sigma_total,
            pipeline,
        })
    }

    pub fn zeros(n: usize, pipeline: PipelineTag) -> Self {
        Self {
            sigma_sex_x: Array1::zeros(n),
            sigma_x: Array1::zeros(n),
            sigma_coh: Array1::zeros(n),
            sigma_total: Array1::zeros(n),
            pipeline,
        }
    }

    pub fn n_bands(&self) -> usize {
        self.sigma_total.len()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuasiparticleEnergies {
    pub eps_gw: Array1<f64>,
}

/// `ε_GW = ε_KS + Σ − V_xc`.
pub fn quasiparticle_energies(es: &ElectronicStructure, sigma: &SelfEnergies) -> Result<QuasiparticleEnergies> {
    check_dim("self-energy length", es.n_bands(), sigma.n_bands())?;
    Ok(QuasiparticleEnergies {
        eps_gw: &es.energies + &sigma.sigma_total - &es.vxc,
    })
}

/// Interactions projected onto the vn and nn auxiliary bases.
#[derive(Debug, Clone)]
pub struct ScreenedProjections {
    /// `P_vnᵀ·W_V·P_vn`
    pub w_vn: Array2<f64>,
    /// `P_nnᵀ·W_V·P_nn`
    pub w_nn: Array2<f64>,
    /// `P_vnᵀ·V·P_vn`
    pub v_vn: Array2<f64>,
}

fn sandwich(x: &Array2<f64>, k: &Array2<f64>) -> Array2<f64> {
    let mut w = x.dot(&k.dot(&x.t()));
    symmetrize(&mut w);
    w
}

/// `W_vn = X·K·Xᵀ` with `X = P_vnᵀ·V·P_vc` (likewise for nn), and
/// `V_vn = P_vnᵀ·V·P_vn`.
pub fn project_screened_interactions(
    e: &EpsilonInverseLowRank,
    dec_vn: &IsdfDecomposition,
    dec_nn: &IsdfDecomposition,
    v: &CoulombOperator,
) -> Result<ScreenedProjections> {
    check_dim("P_vn rows", e.n_r(), dec_vn.p.nrows())?;
    check_dim("P_nn rows", e.n_r(), dec_nn.p.nrows())?;
    let x_vn = dec_vn.p.t().dot(&e.vp);
    let x_nn = dec_nn.p.t().dot(&e.vp);
    let mut v_vn = dec_vn.p.t().dot(&v.apply(&dec_vn.p.view())?);
    symmetrize(&mut v_vn);
    Ok(ScreenedProjections {
        w_vn: sandwich(&x_vn, &e.k),
        w_nn: sandwich(&x_nn, &e.k),
        v_vn,
    })
}

/// `diag(Ψᵀ·(W ⊙ (Φ·Φᵀ))·Ψ)` over the sampled rows.
fn hadamard_diagonal(psi: &Array2<f64>, phi: &ArrayView2<f64>, w: &Array2<f64>) -> Array1<f64> {
    let h = w * &phi.dot(&phi.t());
    let y = h.dot(psi);
    (psi * &y).sum_axis(ndarray::Axis(0))
}

/// Self-energies from projected interactions. `Ψ` is sampled at the vn
/// points for the exchange terms and at the nn points for COH.
pub fn self_energies_lowrank(
    es: &ElectronicStructure,
    proj: &ScreenedProjections,
    dec_vn: &IsdfDecomposition,
    dec_nn: &IsdfDecomposition,
) -> Result<SelfEnergies> {
    hadamard_self_energies(es, proj, dec_vn, dec_nn, PipelineTag::Lowrank)
}

fn hadamard_self_energies(
    es: &ElectronicStructure,
    proj: &ScreenedProjections,
    dec_vn: &IsdfDecomposition,
    dec_nn: &IsdfDecomposition,
    tag: PipelineTag,
) -> Result<SelfEnergies> {
    check_dim("W_vn size", dec_vn.n_mu, proj.w_vn.nrows())?;
    check_dim("V_vn size", dec_vn.n_mu, proj.v_vn.nrows())?;
    check_dim("W_nn size", dec_nn.n_mu, proj.w_nn.nrows())?;
    let psi_vn = dec_vn.sample(&es.psi.view());
    let occ_vn = psi_vn.slice(ndarray::s![.., ..es.nv]);
    let psi_nn = dec_nn.sample(&es.psi.view());
    let sex = -hadamard_diagonal(&psi_vn, &occ_vn, &proj.w_vn);
    let x = -hadamard_diagonal(&psi_vn, &occ_vn, &proj.v_vn);
    let coh = 0.5 * hadamard_diagonal(&psi_nn, &psi_nn.view(), &proj.w_nn);
    SelfEnergies::new(sex, x, coh, tag)
}

fn dense_guard(n_r: usize, limit: usize, what: &'static str) -> Result<()> {
    if n_r > limit {
        return Err(Error::DenseGuard {
            what,
            size: n_r,
            limit,
        });
    }
    Ok(())
}

/// Dense `W_V = (ε⁻¹ − I)·V` for `ε = I − V·χ`.
fn dense_screened(v: &CoulombOperator, chi: &Array2<f64>) -> Result<Array2<f64>> {
    let vd = v.materialize()?;
    let mut eps = -vd.dot(chi);
    for k in 0..eps.nrows() {
        eps[[k, k]] += 1.0;
    }
    let mut eps_inv = lu_invert(&eps.view())?;
    for k in 0..eps_inv.nrows() {
        eps_inv[[k, k]] -= 1.0;
    }
    let mut w = eps_inv.dot(&vd);
    symmetrize(&mut w);
    Ok(w)
}

fn project_dense(p: &Array2<f64>, a: &Array2<f64>) -> Array2<f64> {
    let mut out = p.t().dot(&a.dot(p));
    symmetrize(&mut out);
    out
}

/// Conventional ISDF pipeline: dense `χ = 2·(P·C)·Ω⁻¹·(P·C)ᵀ`, LU
/// inversion of `ε`, projection of `W_V` onto the vn/nn bases.
pub fn self_energies_isdf_conventional(
    es: &ElectronicStructure,
    v: &CoulombOperator,
    decs: &IsdfSet,
) -> Result<SelfEnergies> {
    dense_guard(es.n_r(), crate::smw::DENSE_EPSILON_LIMIT, "ISDF-conventional pipeline")?;
    let m_vc = approximate_vc(es, &decs.vc)?;
    let chi = chi_from_pairs(&m_vc, &es.omega())?;
    let w = dense_screened(v, &chi)?;
    let vd = v.materialize()?;
    let proj = ScreenedProjections {
        w_vn: project_dense(&decs.vn.p, &w),
        w_nn: project_dense(&decs.nn.p, &w),
        v_vn: project_dense(&decs.vn.p, &vd),
    };
    hadamard_self_energies(es, &proj, &decs.vn, &decs.nn, PipelineTag::IsdfConventional)
}

/// `P_vc·C_vc`, the ISDF approximation of the vc pair matrix.
fn approximate_vc(es: &ElectronicStructure, dec: &IsdfDecomposition) -> Result<Array2<f64>> {
    crate::isdf::approximate_pair_matrix(&es.occupied(), &es.unoccupied(), dec)
}

/// Ground truth: exact pair matrices, dense `ε⁻¹`, explicit grid sums.
pub fn self_energies_bruteforce(es: &ElectronicStructure, v: &CoulombOperator) -> Result<SelfEnergies> {
    dense_guard(es.n_r(), BRUTEFORCE_LIMIT, "brute-force pipeline")?;
    let chi = dense_chi(ChiSource::Exact(es))?;
    let w = dense_screened(v, &chi)?;
    let vd = v.materialize()?;
    let (nv, n) = (es.nv, es.n_bands());

    // ρ_{in}, i occupied, pair i + N_v·n
    let r_vn = pair_matrix(&es.occupied(), &es.psi.view())?;
    let r_nn = pair_matrix(&es.psi.view(), &es.psi.view())?;
    let quad = |a: &Array2<f64>, r: &Array2<f64>| -> Array1<f64> {
        let ar = a.dot(r);
        (r * &ar).sum_axis(ndarray::Axis(0))
    };
    let x_pairs = quad(&vd, &r_vn);
    let sex_pairs = quad(&w, &r_vn);
    let coh_pairs = quad(&w, &r_nn);

    let mut sex = Array1::zeros(n);
    let mut x = Array1::zeros(n);
    let mut coh = Array1::zeros(n);
    for band in 0..n {
        for i in 0..nv {
            x[band] -= x_pairs[i + nv * band];
            sex[band] -= sex_pairs[i + nv * band];
        }
        for m in 0..n {
            coh[band] += 0.5 * coh_pairs[m + n * band];
        }
    }
    SelfEnergies::new(sex, x, coh, PipelineTag::Bruteforce)
}

/// How the coupled coefficients are obtained in the low-rank pipeline.
#[derive(Debug, Clone, Copy)]
pub enum CoefficientSource {
    Direct,
    Contour(ContourSpec),
    /// Trapezoid rule with exactly this many nodes (convergence sweeps).
    Fixed(ContourSpec, usize),
}

/// Everything the low-rank pipeline produces.
#[derive(Debug, Clone)]
pub struct LowRankOutput {
    pub t: CoupledCoefficients,
    pub epsilon_inverse: EpsilonInverseLowRank,
    pub projections: ScreenedProjections,
    pub sigma: SelfEnergies,
}

/// `T` on the vc interpolation points.
pub fn coupled_coefficients_for(
    es: &ElectronicStructure,
    dec_vc: &IsdfDecomposition,
    source: CoefficientSource,
) -> Result<CoupledCoefficients> {
    let pv = dec_vc.sample(&es.occupied());
    let pc = dec_vc.sample(&es.unoccupied());
    let e = es.energies.as_slice().expect("contiguous energies");
    match source {
        CoefficientSource::Direct => coupled_coefficients_direct(&pv.view(), &pc.view(), e),
        CoefficientSource::Contour(spec) => coupled_coefficients(&pv.view(), &pc.view(), e, &spec),
        CoefficientSource::Fixed(spec, nodes) => Ok(CoupledCoefficients {
            t: coupled_coefficients_fixed(&pv.view(), &pc.view(), e, &spec, nodes)?,
            nodes_used: nodes,
            est_rel_error: f64::NAN,
        }),
    }
}

/// Coupled coefficients → `K` → projections → self-energies.
pub fn run_lowrank(
    es: &ElectronicStructure,
    v: &CoulombOperator,
    decs: &IsdfSet,
    source: CoefficientSource,
) -> Result<LowRankOutput> {
    let t = coupled_coefficients_for(es, &decs.vc, source)?;
    let epsilon_inverse = EpsilonInverseLowRank::new(&t, decs.vc.p.clone(), v)?;
    let projections = project_screened_interactions(&epsilon_inverse, &decs.vn, &decs.nn, v)?;
    let sigma = self_energies_lowrank(es, &projections, &decs.vn, &decs.nn)?;
    Ok(LowRankOutput {
        t,
        epsilon_inverse,
        projections,
        sigma,
    })
}

/// Per-band comparison of the ISDF self-energy error with its first-order
/// bound.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub band: usize,
    pub observed: f64,
    pub bound: f64,
    /// `‖δX‖₂·tr(A_(Nn,Nn)) + 3/2·|tr(δA_(Nn,Nn))|`, valid when the
    /// occupied block shares the `nn` decomposition; reported only.
    pub bound_single_isdf: f64,
    pub slack: f64,
    pub holds: bool,
}

/// Inputs shared by every band of the bound.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundSummary {
    /// `‖δX‖₂`
    pub delta_x_norm: f64,
    /// `‖δM_vc‖_F`
    pub delta_m_norm: f64,
    pub bands: Vec<BoundReport>,
}

impl BoundSummary {
    pub fn all_hold(&self) -> bool {
        self.bands.iter().all(|b| b.holds)
    }
}

/// `V^{1/2}` from the symmetric eigendecomposition of the dense Coulomb
/// matrix (negative roundoff eigenvalues clipped to zero).
pub fn coulomb_sqrt(v: &CoulombOperator) -> Result<Array2<f64>> {
    let vd = v.materialize()?;
    let eig = sym_eig(&vd.view())?;
    Ok(eig.map(|x| x.max(0.0).sqrt()))
}

/// Compares `|Σ_isdf(n) − Σ_exact(n)|` with
/// `‖δX‖₂·tr(A_(Nn,Nn)) + |tr(δA_(Vn,Vn))| + 1/2·|tr(δA_(Nn,Nn))|`, where
/// `X = V^{1/2}·M_vc·(−2Ω⁻¹)·M_vcᵀ·V^{1/2}`, `A = MᵀVM` and `δ` is the
/// change from exact to ISDF pair matrices. Each block is perturbed by the
/// decomposition the pipeline uses for it: `vc` in `X`, `vn` for the
/// occupied trace, `nn` for the full trace. The first-order slack is
/// `0.1·‖δM_vc‖_F·bound`.
pub fn isdf_error_bound_check(es: &ElectronicStructure, v: &CoulombOperator, decs: &IsdfSet) -> Result<BoundSummary> {
    let exact = self_energies_bruteforce(es, v)?;
    let approx = self_energies_isdf_conventional(es, v, decs)?;
    let vd = v.materialize()?;
    let v_half = coulomb_sqrt(v)?;

    let m_vc = pair_matrix(&es.occupied(), &es.unoccupied())?;
    let m_vc_isdf = approximate_vc(es, &decs.vc)?;
    let x_of = |m: &Array2<f64>| -> Result<Array2<f64>> {
        let chi = chi_from_pairs(m, &es.omega())?;
        let mut x = -v_half.dot(&chi.dot(&v_half));
        symmetrize(&mut x);
        Ok(x)
    };
    let delta_x = x_of(&m_vc_isdf)? - x_of(&m_vc)?;
    let dx_eig = sym_eig(&delta_x.view())?;
    let delta_x_norm = dx_eig.max().abs().max(dx_eig.min().abs());
    let delta_m_norm = frobenius(&(&m_vc_isdf - &m_vc).view());

    let (a, b) = (es.psi.view(), es.psi.view());
    let m_nn = pair_matrix(&a, &b)?;
    let m_nn_isdf = crate::isdf::approximate_pair_matrix(&a, &b, &decs.nn)?;
    let diag_a = |m: &Array2<f64>| -> Array1<f64> { (m * &vd.dot(m)).sum_axis(ndarray::Axis(0)) };
    let a_exact = diag_a(&m_nn);
    let a_isdf = diag_a(&m_nn_isdf);
    let occ = es.occupied();
    let m_vn = pair_matrix(&occ, &a)?;
    let m_vn_isdf = crate::isdf::approximate_pair_matrix(&occ, &a, &decs.vn)?;
    let delta_occ = diag_a(&m_vn_isdf) - diag_a(&m_vn);

    let n = es.n_bands();
    let nv = es.nv;
    let bands = (0..n)
        .map(|band| {
            let cols = (0..n).map(|m| m + n * band);
            let (tr, tr_delta) = cols.fold((0.0, 0.0), |(t, d), c| (t + a_exact[c], d + a_isdf[c] - a_exact[c]));
            let tr_delta_occ: f64 = (0..nv).map(|i| delta_occ[i + nv * band]).sum();
            let bound = delta_x_norm * tr + tr_delta_occ.abs() + 0.5 * tr_delta.abs();
            let bound_single_isdf = delta_x_norm * tr + 1.5 * tr_delta.abs();
            let slack = 0.1 * delta_m_norm * bound;
            let observed = (approx.sigma_total[band] - exact.sigma_total[band]).abs();
            BoundReport {
                band,
                observed,
                bound,
                bound_single_isdf,
                slack,
                holds: observed <= bound + slack,
            }
        })
        .collect();
    Ok(BoundSummary {
        delta_x_norm,
        delta_m_norm,
        bands,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::isdf::{IsdfCoefficients, PointSelector};
    use crate::model::{build_coulomb, build_synthetic_system, CoulombMode, Grid};

    fn system(seed: u64, nv: usize, nc: usize) -> (ElectronicStructure, CoulombOperator) {
        let g = Grid::with_spacing([4, 4, 4], 1.25).unwrap();
        let es = build_synthetic_system(seed, &g, nv, nc, 0.3, 1.5).unwrap();
        let v = build_coulomb(&g, CoulombMode::ReciprocalDiagonal).unwrap();
        (es, v)
    }

    fn max_rel(a: &Array1<f64>, b: &Array1<f64>) -> f64 {
        a.iter()
            .zip(b)
            .map(|(x, y)| (x - y).abs() / y.abs().max(1e-300))
            .fold(0.0, f64::max)
    }

    #[test]
    fn two_band_exchange_by_hand() {
        let (es, v) = system(1, 1, 1);
        let s = self_energies_bruteforce(&es, &v).unwrap();
        for n in 0..2 {
            let rho = &es.psi.column(n) * &es.psi.column(0);
            let vr = v.apply(&rho.clone().insert_axis(ndarray::Axis(1)).view()).unwrap();
            let oracle = -rho.dot(&vr.column(0));
            assert!((s.sigma_x[n] - oracle).abs() <= 1e-12 * oracle.abs());
        }
        assert!(s.sigma_x.iter().all(|&x| x <= 0.0));
        let qp = quasiparticle_energies(&es, &s).unwrap();
        for n in 0..2 {
            assert_eq!(qp.eps_gw[n], es.energies[n] + s.sigma_total[n] - es.vxc[n]);
        }
    }

    #[test]
    fn totals_are_exact_sums() {
        let (es, v) = system(2, 3, 3);
        let s = self_energies_bruteforce(&es, &v).unwrap();
        for n in 0..6 {
            assert_eq!(s.sigma_total[n], s.sigma_sex_x[n] + s.sigma_x[n] + s.sigma_coh[n]);
        }
    }

    #[test]
    fn full_rank_isdf_matches_bruteforce() {
        let (es, v) = system(3, 3, 3);
        let decs = IsdfSet::full_rank(&es).unwrap();
        let exact = self_energies_bruteforce(&es, &v).unwrap();
        let conv = self_energies_isdf_conventional(&es, &v, &decs).unwrap();
        assert!(max_rel(&conv.sigma_total, &exact.sigma_total) <= 1e-9);
        assert!(max_rel(&conv.sigma_x, &exact.sigma_x) <= 1e-9);
        let bound = isdf_error_bound_check(&es, &v, &decs).unwrap();
        for b in &bound.bands {
            assert!(b.observed <= 1e-9 && b.bound <= 1e-8, "{b:?}");
        }
    }

    #[test]
    fn bound_covers_truncated_occupied_block() {
        let g = Grid::with_spacing([4, 4, 4], 1.25).unwrap();
        let es = build_synthetic_system(3, &g, 4, 4, 0.05, 1.5).unwrap();
        let v = build_coulomb(&g, CoulombMode::ReciprocalDiagonal).unwrap();
        let k = IsdfCoefficients {
            k_vc: 100.0,
            k_vn: 3.0,
            k_nn: 3.0,
        };
        let decs = IsdfSet::build(&es, k, PointSelector::QrcpDirect).unwrap();
        let summary = isdf_error_bound_check(&es, &v, &decs).unwrap();
        assert!(summary.delta_x_norm <= 1e-12);
        assert!(summary.bands.iter().any(|b| b.observed > 1e-8));
        assert!(summary.all_hold(), "{:?}", summary.bands);
    }

    #[test]
    fn lowrank_matches_conventional() {
        let (es, v) = system(4, 3, 4);
        let decs = IsdfSet::build(&es, IsdfCoefficients::uniform(2.0), PointSelector::QrcpDirect).unwrap();
        let lr = run_lowrank(&es, &v, &decs, CoefficientSource::Direct).unwrap();
        let conv = self_energies_isdf_conventional(&es, &v, &decs).unwrap();
        assert_eq!(lr.sigma.pipeline, PipelineTag::Lowrank);
        for (a, b) in [
            (&lr.sigma.sigma_sex_x, &conv.sigma_sex_x),
            (&lr.sigma.sigma_x, &conv.sigma_x),
            (&lr.sigma.sigma_coh, &conv.sigma_coh),
        ] {
            assert!(max_rel(a, b) <= 1e-9);
        }
    }

    #[test]
    fn projections_match_dense_screening() {
        let (es, v) = system(5, 3, 3);
        let decs = IsdfSet::build(&es, IsdfCoefficients::uniform(2.0), PointSelector::QrcpDirect).unwrap();
        let lr = run_lowrank(&es, &v, &decs, CoefficientSource::Direct).unwrap();
        let (_, eps_inv) = crate::smw::epsilon_dense_oracle(
            &v,
            ChiSource::Isdf {
                p: &decs.vc.p,
                t: &lr.t.t,
            },
        )
        .unwrap();
        let mut wv = eps_inv;
        for k in 0..wv.nrows() {
            wv[[k, k]] -= 1.0;
        }
        let wv = wv.dot(&v.materialize().unwrap());
        let oracle = decs.vn.p.t().dot(&wv.dot(&decs.vn.p));
        assert!(crate::linalg::rel_diff(&lr.projections.w_vn.view(), &oracle.view()) <= 1e-9);
        let e = sym_eig(&lr.projections.v_vn.view()).unwrap();
        assert!(e.min() >= -1e-10 * e.max());
    }

    #[test]
    fn zero_screening_gives_zero() {
        let (es, v) = system(6, 2, 2);
        let decs = IsdfSet::build(&es, IsdfCoefficients::uniform(2.0), PointSelector::QrcpDirect).unwrap();
        let n_vn = decs.vn.n_mu;
        let n_nn = decs.nn.n_mu;
        let proj = ScreenedProjections {
            w_vn: Array2::zeros((n_vn, n_vn)),
            w_nn: Array2::zeros((n_nn, n_nn)),
            v_vn: Array2::zeros((n_vn, n_vn)),
        };
        let s = self_energies_lowrank(&es, &proj, &decs.vn, &decs.nn).unwrap();
        assert!(s.sigma_total.iter().all(|&x| x == 0.0));
        let _ = v;
    }

    #[test]
    fn coulomb_root_squares_back() {
        let (_, v) = system(7, 1, 1);
        let h = coulomb_sqrt(&v).unwrap();
        let vd = v.materialize().unwrap();
        assert!(crate::linalg::rel_diff(&h.dot(&h).view(), &vd.view()) <= 1e-9);
    }

    #[test]
    fn guards() {
        let g = Grid::with_spacing([8, 8, 16], 1.25).unwrap();
        let es = build_synthetic_system(1, &g, 1, 1, 0.3, 1.5).unwrap();
        let v = build_coulomb(&g, CoulombMode::ReciprocalDiagonal).unwrap();
        assert!(matches!(self_energies_bruteforce(&es, &v), Err(Error::DenseGuard { .. })));
        let s = SelfEnergies::zeros(3, PipelineTag::Lowrank);
        assert!(quasiparticle_energies(&es, &s).is_err());
    }
}
