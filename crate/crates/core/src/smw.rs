//! Low-rank inverse dielectric matrix.
//!
//! With the ISDF factorisation `M_vc ≈ P·C` the polarisability is
//! `χ = 2·P·T·Pᵀ` (`T = C·Ω⁻¹·Cᵀ`) and `ε = I − V·χ`. The
//! Sherman–Morrison–Woodbury identity gives
//!
//! ```text
//! ε⁻¹ = I + V·P·K·Pᵀ,   K = (½·T⁻¹ − Pᵀ·V·P)⁻¹ = (I − 2·T·S)⁻¹·2·T,   S = Pᵀ·V·P.
//! ```
//!
//! The second form of `K` never inverts `T`, which is badly conditioned
//! when the interpolation points nearly exhaust the pair rank.

use ndarray::{Array2, ArrayView2};

use crate::contour::CoupledCoefficients;
use crate::error::{check_dim, Error, Result};
use crate::linalg::{frobenius, lu_factor, lu_invert, sym_eig, symmetrize};
use crate::model::{CoulombOperator, ElectronicStructure, OmegaDiagonal};

/// Largest grid for which the dense dielectric oracle is built.
pub const DENSE_EPSILON_LIMIT: usize = 1024;

/// `A⁻¹ − A⁻¹·U·(I + Wᵀ·A⁻¹·U)⁻¹·Wᵀ·A⁻¹`, the inverse of `A + U·Wᵀ`.
pub fn smw_inverse(a: &ArrayView2<f64>, u: &ArrayView2<f64>, w: &ArrayView2<f64>) -> Result<Array2<f64>> {
    let n = a.nrows();
    check_dim("smw_inverse U rows", n, u.nrows())?;
    check_dim("smw_inverse W rows", n, w.nrows())?;
    check_dim("smw_inverse U/W rank", u.ncols(), w.ncols())?;
    let a_inv = lu_invert(a)?;
    let a_inv_u = a_inv.dot(u);
    let wt_a_inv = w.t().dot(&a_inv);
    let mut inner = w.t().dot(&a_inv_u);
    for k in 0..inner.nrows() {
        inner[[k, k]] += 1.0;
    }
    let correction = lu_factor(&inner.view())?.solve(&wt_a_inv.view())?;
    Ok(a_inv - a_inv_u.dot(&correction))
}

/// `ε⁻¹ = I + V·P·K·Pᵀ` in factored form.
#[derive(Debug, Clone)]
pub struct EpsilonInverseLowRank {
    /// `P_vc`, `N_r × N_μ`.
    pub p: Array2<f64>,
    /// `K`, `N_μ × N_μ`.
    pub k: Array2<f64>,
    /// `V·P_vc`, cached.
    pub vp: Array2<f64>,
}

/// `Pᵀ·V·P`, symmetrised.
pub fn coulomb_projection(p: &ArrayView2<f64>, vp: &ArrayView2<f64>) -> Array2<f64> {
    let mut s = p.t().dot(vp);
    symmetrize(&mut s);
    s
}

/// `T` must be negative definite up to roundoff; returns its spectrum
/// bounds `(min, max)`.
fn check_negative(t: &Array2<f64>, what: &'static str) -> Result<(f64, f64)> {
    let eig = sym_eig(&t.view())?;
    let (lo, hi) = (eig.min(), eig.max());
    if hi > 1e-10 * frobenius(&t.view()) {
        return Err(Error::Definiteness {
            expected: what,
            eigenvalue: hi,
        });
    }
    Ok((lo, hi))
}

/// `K = (½·T⁻¹ − Pᵀ·V·P)⁻¹`, evaluated as `(I − 2·T·S)⁻¹·2·T`.
///
/// Returns `K` together with `S = Pᵀ·V·P`.
pub fn assemble_k(
    t: &CoupledCoefficients,
    p: &ArrayView2<f64>,
    v: &CoulombOperator,
) -> Result<(Array2<f64>, Array2<f64>)> {
    let vp = v.apply(p)?;
    let s = coulomb_projection(p, &vp.view());
    let k = assemble_k_with(&t.t, &s)?;
    Ok((k, s))
}

fn assemble_k_with(t: &Array2<f64>, s: &Array2<f64>) -> Result<Array2<f64>> {
    let n = t.nrows();
    check_dim("T vs PᵀVP", n, s.nrows())?;
    check_negative(t, "negative definite (T)")?;
    let two_t = t * 2.0;
    let mut middle = -two_t.dot(s);
    for k in 0..n {
        middle[[k, k]] += 1.0;
    }
    let mut k = lu_factor(&middle.view())?.solve(&two_t.view())?;
    symmetrize(&mut k);
    Ok(k)
}

impl EpsilonInverseLowRank {
    /// Builds the factored inverse from `T` and `P_vc`.
    pub fn new(t: &CoupledCoefficients, p: Array2<f64>, v: &CoulombOperator) -> Result<Self> {
        check_dim("T vs P_vc columns", p.ncols(), t.t.nrows())?;
        let vp = v.apply(&p.view())?;
        let s = coulomb_projection(&p.view(), &vp.view());
        let k = assemble_k_with(&t.t, &s)?;
        Ok(Self { p, k, vp })
    }

    pub fn n_r(&self) -> usize {
        self.p.nrows()
    }

    /// `X + V·P·(K·(Pᵀ·X))`.
    pub fn apply(&self, x: &ArrayView2<f64>) -> Result<Array2<f64>> {
        check_dim("epsilon_inverse_apply rows", self.n_r(), x.nrows())?;
        let inner = self.k.dot(&self.p.t().dot(x));
        Ok(x.to_owned() + self.vp.dot(&inner))
    }

    /// Dense `N_r × N_r` matrix (validation only).
    pub fn materialize(&self) -> Result<Array2<f64>> {
        let n = self.n_r();
        guard(n)?;
        let mut m = self.vp.dot(&self.k.dot(&self.p.t()));
        for k in 0..n {
            m[[k, k]] += 1.0;
        }
        Ok(m)
    }

    /// Extreme eigenvalues `(min, max)` of `K`.
    pub fn k_spectrum(&self) -> Result<(f64, f64)> {
        let e = sym_eig(&self.k.view())?;
        Ok((e.min(), e.max()))
    }
}

fn guard(n_r: usize) -> Result<()> {
    if n_r > DENSE_EPSILON_LIMIT {
        return Err(Error::DenseGuard {
            what: "dense dielectric matrix",
            size: n_r,
            limit: DENSE_EPSILON_LIMIT,
        });
    }
    Ok(())
}

/// Source of the polarisability for the dense oracle.
#[derive(Debug, Clone, Copy)]
pub enum ChiSource<'a> {
    /// `χ = 2·P·T·Pᵀ` from an ISDF factorisation and its coupled coefficients.
    Isdf { p: &'a Array2<f64>, t: &'a Array2<f64> },
    /// `χ = 2·M·Ω⁻¹·Mᵀ` from the exact occupied/unoccupied pair matrix.
    Exact(&'a ElectronicStructure),
}

/// Dense `χ` (`N_r × N_r`, symmetric).
pub fn dense_chi(source: ChiSource<'_>) -> Result<Array2<f64>> {
    let mut chi = match source {
        ChiSource::Isdf { p, t } => {
            guard(p.nrows())?;
            check_dim("χ: T vs P columns", p.ncols(), t.nrows())?;
            p.dot(&t.dot(&p.t())) * 2.0
        }
        ChiSource::Exact(es) => {
            guard(es.n_r())?;
            let m = crate::isdf::pair_matrix(&es.occupied(), &es.unoccupied())?;
            return chi_from_pairs(&m, &es.omega());
        }
    };
    symmetrize(&mut chi);
    Ok(chi)
}

/// `χ = 2·M·Ω⁻¹·Mᵀ` for any vc pair matrix in pair order `i + N_v·j`.
pub fn chi_from_pairs(m: &Array2<f64>, omega: &OmegaDiagonal) -> Result<Array2<f64>> {
    check_dim("χ: pair columns vs Ω", omega.entries.len(), m.ncols())?;
    let mut mw = m.clone();
    for (mut col, &w) in mw.columns_mut().into_iter().zip(omega.entries.iter()) {
        col /= w;
    }
    let mut chi = mw.dot(&m.t()) * 2.0;
    symmetrize(&mut chi);
    Ok(chi)
}

/// Dense `ε = I − V·χ` and its LU inverse.
pub fn epsilon_dense_oracle(v: &CoulombOperator, source: ChiSource<'_>) -> Result<(Array2<f64>, Array2<f64>)> {
    let chi = dense_chi(source)?;
    check_dim("χ vs Coulomb grid", v.grid().n_r(), chi.nrows())?;
    let mut eps = -v.apply(&chi.view())?;
    for k in 0..eps.nrows() {
        eps[[k, k]] += 1.0;
    }
    let inv = lu_invert(&eps.view())?;
    Ok((eps, inv))
}
