//! Interpolative separable density fitting of orbital-pair matrices.
//!
//! For two orbital sets `Ψ_a` (`N_r × N1`) and `Ψ_b` (`N_r × N2`) the pair
//! matrix `M` has column `i + N1·j` equal to `ψ_{a,i} ⊙ ψ_{b,j}`. ISDF picks
//! `N_μ` grid points `r_μ` and an auxiliary basis `P` (`N_r × N_μ`) so that
//! `M ≈ P·C` with `C = M[r_μ, :]`.

use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::linalg::{frobenius, lu_factor, qrcp_pivots, select_rows, sym_eig, symmetrize};
use crate::model::ElectronicStructure;

/// Largest pair matrix (`N_r·N1·N2` entries) that may be materialised.
pub const PAIR_MATRIX_LIMIT: usize = 1 << 26;

/// Relative eigenvalue cutoff of the pseudo-inverse fallback.
pub const PINV_REL_THRESHOLD: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PairSetLabel {
    /// occupied × unoccupied
    Vc,
    /// occupied × all bands
    Vn,
    /// all bands × all bands
    Nn,
}

impl PairSetLabel {
    pub fn name(self) -> &'static str {
        match self {
            Self::Vc => "vc",
            Self::Vn => "vn",
            Self::Nn => "nn",
        }
    }

    /// `(N1, N2)` for a system with `nv` occupied and `nc` unoccupied bands.
    pub fn shape(self, nv: usize, nc: usize) -> (usize, usize) {
        match self {
            Self::Vc => (nv, nc),
            Self::Vn => (nv, nv + nc),
            Self::Nn => (nv + nc, nv + nc),
        }
    }

    /// Number of distinct pair products. Pairs `(i, j)` and `(j, i)` give the
    /// same column whenever both bands belong to both sets, which bounds
    /// the rank of `M`.
    pub fn distinct_pairs(self, nv: usize, nc: usize) -> usize {
        let n = nv + nc;
        match self {
            Self::Vc => nv * nc,
            Self::Vn => nv * nc + nv * (nv + 1) / 2,
            Self::Nn => n * (n + 1) / 2,
        }
    }

    /// `(Ψ_a, Ψ_b)` views of the system's wavefunctions.
    pub fn factors(self, es: &ElectronicStructure) -> (ArrayView2<'_, f64>, ArrayView2<'_, f64>) {
        match self {
            Self::Vc => (es.occupied(), es.unoccupied()),
            Self::Vn => (es.occupied(), es.psi.view()),
            Self::Nn => (es.psi.view(), es.psi.view()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "method")]
pub enum PointSelector {
    /// Column-pivoted QR of the full transposed pair matrix.
    QrcpDirect,
    /// Column-pivoted QR of a seeded Gaussian sketch with `2·N_μ` rows.
    QrcpSketched { seed: u64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct IsdfDecomposition {
    pub label: PairSetLabel,
    pub k_mu: f64,
    pub n_mu: usize,
    /// Interpolation points, strictly increasing grid indices.
    pub points: Vec<usize>,
    /// Auxiliary basis, `N_r × N_μ`.
    pub p: Array2<f64>,
    /// Whether the Gram solve fell back to the pseudo-inverse.
    pub pseudo_inverse: bool,
}

impl IsdfDecomposition {
    /// Rows of `psi` at the interpolation points.
    pub fn sample(&self, psi: &ArrayView2<f64>) -> Array2<f64> {
        select_rows(psi, &self.points)
    }
}

/// `round(k·√(N1·N2))`, at least 1.
pub fn num_aux(k_mu: f64, n1: usize, n2: usize) -> usize {
    let n = (k_mu * ((n1 * n2) as f64).sqrt()).round();
    if n < 1.0 {
        1
    } else {
        n as usize
    }
}

fn check_factors(psi_a: &ArrayView2<f64>, psi_b: &ArrayView2<f64>) -> Result<()> {
    check_dim("pair factors (grid points)", psi_a.nrows(), psi_b.nrows())
}

fn check_guard(n_r: usize, n1: usize, n2: usize) -> Result<()> {
    let size = n_r * n1 * n2;
    if size > PAIR_MATRIX_LIMIT {
        return Err(Error::DenseGuard {
            what: "pair matrix",
            size,
            limit: PAIR_MATRIX_LIMIT,
        });
    }
    Ok(())
}

/// Materialises `M` (`N_r × N1·N2`, pair `(i, j)` in column `i + N1·j`).
pub fn pair_matrix(psi_a: &ArrayView2<f64>, psi_b: &ArrayView2<f64>) -> Result<Array2<f64>> {
    check_factors(psi_a, psi_b)?;
    let (n_r, n1) = psi_a.dim();
    let n2 = psi_b.ncols();
    check_guard(n_r, n1, n2)?;
    let mut m = Array2::zeros((n_r, n1 * n2));
    for j in 0..n2 {
        for i in 0..n1 {
            let mut col = m.column_mut(i + n1 * j);
            col.assign(&psi_a.column(i));
            col *= &psi_b.column(j);
        }
    }
    Ok(m)
}

/// Picks `n_mu` grid points by column-pivoted QR of `Mᵀ`. The result is
/// sorted ascending.
pub fn select_interpolation_points(
    psi_a: &ArrayView2<f64>,
    psi_b: &ArrayView2<f64>,
    n_mu: usize,
    selector: PointSelector,
) -> Result<Vec<usize>> {
    check_factors(psi_a, psi_b)?;
    let n_r = psi_a.nrows();
    if n_mu == 0 || n_mu > n_r {
        return Err(Error::InvalidArgument(format!(
            "cannot select {n_mu} interpolation points from {n_r} grid points"
        )));
    }
    let m = pair_matrix(psi_a, psi_b)?;
    let mut points = match selector {
        PointSelector::QrcpDirect => qrcp_pivots(&m.t(), n_mu),
        PointSelector::QrcpSketched { seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let rows = 2 * n_mu;
            let g = Array2::from_shape_fn((rows, m.ncols()), |_| rng.sample::<f64, _>(rand_distr::StandardNormal));
            let sketch = g.dot(&m.t());
            qrcp_pivots(&sketch.view(), n_mu)
        }
    };
    points.sort_unstable();
    Ok(points)
}

/// Least-squares auxiliary basis `P = (A ⊙ B)·(A_μ ⊙ B_μ)⁻¹` with
/// `A = Ψ_a·Ψ_a[μ]ᵀ` and `B = Ψ_b·Ψ_b[μ]ᵀ`, never forming `M`.
///
/// The Gram matrix is solved by LU; if that fails or its pivots span more
/// than `1/PINV_REL_THRESHOLD`, a truncated eigendecomposition is used.
pub fn fit_auxiliary_basis(
    psi_a: &ArrayView2<f64>,
    psi_b: &ArrayView2<f64>,
    points: &[usize],
    label: PairSetLabel,
    k_mu: f64,
) -> Result<IsdfDecomposition> {
    check_factors(psi_a, psi_b)?;
    let n_r = psi_a.nrows();
    let mut seen = vec![false; n_r];
    for &p in points {
        if p >= n_r || std::mem::replace(&mut seen[p], true) {
            return Err(Error::InvalidArgument(format!(
                "interpolation point {p} out of range or repeated"
            )));
        }
    }
    if points.is_empty() {
        return Err(Error::InvalidArgument("no interpolation points".into()));
    }
    let a_mu = select_rows(psi_a, points);
    let b_mu = select_rows(psi_b, points);
    let z = &psi_a.dot(&a_mu.t()) * &psi_b.dot(&b_mu.t());
    let mut gram = &a_mu.dot(&a_mu.t()) * &b_mu.dot(&b_mu.t());
    symmetrize(&mut gram);

    let lu = lu_factor(&gram.view()).ok().filter(|f| {
        let piv = f.pivots();
        let max = piv.iter().copied().fold(0.0, f64::max);
        let min = piv.iter().copied().fold(f64::INFINITY, f64::min);
        min >= PINV_REL_THRESHOLD * max
    });
    let (p, pseudo_inverse) = match lu {
        // Gram is symmetric, so Pᵀ = G⁻¹·Zᵀ
        Some(f) => (f.solve(&z.t())?.reversed_axes(), false),
        None => (z.dot(&pseudo_inverse(&gram)?), true),
    };
    Ok(IsdfDecomposition {
        label,
        k_mu,
        n_mu: points.len(),
        points: points.to_vec(),
        p,
        pseudo_inverse,
    })
}

fn pseudo_inverse(g: &Array2<f64>) -> Result<Array2<f64>> {
    let eig = sym_eig(&g.view())?;
    let cutoff = PINV_REL_THRESHOLD * eig.values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if !(cutoff > 0.0) {
        return Err(Error::Singular {
            pivot: 0,
            magnitude: 0.0,
        });
    }
    Ok(eig.map(|v| if v.abs() > cutoff { 1.0 / v } else { 0.0 }))
}

/// Selects points and fits the basis for one pair set of `es`. The number
/// of points is `num_aux(k, N1, N2)` clamped to the grid size and to the
/// number of distinct pairs.
pub fn decompose(
    es: &ElectronicStructure,
    label: PairSetLabel,
    k_mu: f64,
    selector: PointSelector,
) -> Result<IsdfDecomposition> {
    if !(k_mu > 0.0) {
        return Err(Error::InvalidArgument(format!("ISDF coefficient {k_mu} must be positive")));
    }
    let (n1, n2) = label.shape(es.nv, es.nc);
    let n_mu = num_aux(k_mu, n1, n2)
        .min(es.n_r())
        .min(label.distinct_pairs(es.nv, es.nc));
    let (a, b) = label.factors(es);
    let points = select_interpolation_points(&a, &b, n_mu, selector)?;
    fit_auxiliary_basis(&a, &b, &points, label, k_mu)
}

/// ISDF coefficients `(k_vc, k_vn, k_nn)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IsdfCoefficients {
    pub k_vc: f64,
    pub k_vn: f64,
    pub k_nn: f64,
}

impl IsdfCoefficients {
    pub fn uniform(k: f64) -> Self {
        Self {
            k_vc: k,
            k_vn: k,
            k_nn: k,
        }
    }
}

impl Default for IsdfCoefficients {
    fn default() -> Self {
        Self::uniform(8.0)
    }
}

/// The three decompositions the self-energy pipelines need.
#[derive(Debug, Clone, PartialEq)]
pub struct IsdfSet {
    pub vc: IsdfDecomposition,
    pub vn: IsdfDecomposition,
    pub nn: IsdfDecomposition,
}

impl IsdfSet {
    pub fn build(es: &ElectronicStructure, k: IsdfCoefficients, selector: PointSelector) -> Result<Self> {
        Ok(Self {
            vc: decompose(es, PairSetLabel::Vc, k.k_vc, selector)?,
            vn: decompose(es, PairSetLabel::Vn, k.k_vn, selector)?,
            nn: decompose(es, PairSetLabel::Nn, k.k_nn, selector)?,
        })
    }

    /// Exact fit: every grid point interpolates (for oracles).
    pub fn full_rank(es: &ElectronicStructure) -> Result<Self> {
        let all: Vec<usize> = (0..es.n_r()).collect();
        let fit = |label: PairSetLabel| {
            let (a, b) = label.factors(es);
            let (n1, n2) = label.shape(es.nv, es.nc);
            let k = es.n_r() as f64 / ((n1 * n2) as f64).sqrt();
            fit_auxiliary_basis(&a, &b, &all, label, k)
        };
        Ok(Self {
            vc: fit(PairSetLabel::Vc)?,
            vn: fit(PairSetLabel::Vn)?,
            nn: fit(PairSetLabel::Nn)?,
        })
    }
}

/// `‖M − P·C‖_F / ‖M‖_F` with `C = M[points, :]`.
pub fn isdf_reconstruction_error(
    psi_a: &ArrayView2<f64>,
    psi_b: &ArrayView2<f64>,
    dec: &IsdfDecomposition,
) -> Result<f64> {
    let m = pair_matrix(psi_a, psi_b)?;
    check_dim("ISDF basis rows", m.nrows(), dec.p.nrows())?;
    let c = select_rows(&m.view(), &dec.points);
    let norm = frobenius(&m.view());
    let diff = m - dec.p.dot(&c);
    Ok(if norm > 0.0 {
        frobenius(&diff.view()) / norm
    } else {
        frobenius(&diff.view())
    })
}

/// Singular values of `M` in descending order, at most `max_terms` of
/// them, from the eigenvalues of the smaller Gram matrix.
pub fn singular_value_report(
    psi_a: &ArrayView2<f64>,
    psi_b: &ArrayView2<f64>,
    max_terms: usize,
) -> Result<Array1<f64>> {
    let m = pair_matrix(psi_a, psi_b)?;
    let gram = if m.nrows() <= m.ncols() {
        m.dot(&m.t())
    } else {
        m.t().dot(&m)
    };
    let eig = sym_eig(&gram.view())?;
    let mut s: Vec<f64> = eig.values.iter().rev().map(|&v| v.max(0.0).sqrt()).collect();
    s.truncate(max_terms);
    Ok(Array1::from(s))
}

/// `M ≈ P·C` rebuilt from a decomposition (for diagnostics).
pub fn approximate_pair_matrix(
    psi_a: &ArrayView2<f64>,
    psi_b: &ArrayView2<f64>,
    dec: &IsdfDecomposition,
) -> Result<Array2<f64>> {
    let a = dec.sample(psi_a);
    let b = dec.sample(psi_b);
    let c = pair_matrix(&a.view(), &b.view())?;
    Ok(dec.p.dot(&c))
}

/// Residual column norms of `M − P·C` (one per pair), for reports.
pub fn pair_residuals(
    psi_a: &ArrayView2<f64>,
    psi_b: &ArrayView2<f64>,
    dec: &IsdfDecomposition,
) -> Result<Array1<f64>> {
    let m = pair_matrix(psi_a, psi_b)?;
    let approx = approximate_pair_matrix(psi_a, psi_b, dec)?;
    Ok((m - approx).map_axis(Axis(0), |c| c.dot(&c).sqrt()))
}
