//! Dense kernels used by the pipeline: column-pivoted Householder QR,
//! LU with partial pivoting, a symmetric eigensolver and the separable
//! 3D discrete Fourier transform on the simulation grid.
//!
//! Matrix products themselves go through `ndarray`'s `dot`; everything
//! that factors or decomposes a matrix lives here.

mod dft;
mod eig;
mod lu;
mod qr;

pub use dft::{dft, Dft3, Direction};
pub use eig::{sym_eig, SymEig};
pub use lu::{lu_factor, lu_invert, lu_solve, LuFactors};
pub use qr::{qr_orthonormal, qrcp, qrcp_pivots, QrcpResult};

use ndarray::{Array2, ArrayView2, Zip};

pub fn frobenius(a: &ArrayView2<f64>) -> f64 {
    a.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// `‖a − b‖_F / ‖b‖_F`, or the absolute difference when `b` vanishes.
pub fn rel_diff(a: &ArrayView2<f64>, b: &ArrayView2<f64>) -> f64 {
    let mut num = 0.0;
    Zip::from(a).and(b).for_each(|x, y| num += (x - y) * (x - y));
    let den = frobenius(b);
    if den == 0.0 {
        num.sqrt()
    } else {
        num.sqrt() / den
    }
}

/// Replaces `a` by `(a + aᵀ)/2` in place.
pub fn symmetrize(a: &mut Array2<f64>) {
    let n = a.nrows();
    debug_assert_eq!(n, a.ncols());
    for i in 0..n {
        for j in (i + 1)..n {
            let m = 0.5 * (a[[i, j]] + a[[j, i]]);
            a[[i, j]] = m;
            a[[j, i]] = m;
        }
    }
}

pub fn symmetry_defect(a: &ArrayView2<f64>) -> f64 {
    let n = a.nrows();
    let mut s = 0.0;
    for i in 0..n {
        for j in 0..n {
            let d = a[[i, j]] - a[[j, i]];
            s += d * d;
        }
    }
    s.sqrt()
}

/// Infinity norm (maximum absolute row sum).
pub fn norm_inf(a: &ArrayView2<f64>) -> f64 {
    a.rows()
        .into_iter()
        .map(|r| r.iter().map(|x| x.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Selects the given rows of `a`, in order.
pub fn select_rows(a: &ArrayView2<f64>, rows: &[usize]) -> Array2<f64> {
    let mut out = Array2::zeros((rows.len(), a.ncols()));
    for (k, &r) in rows.iter().enumerate() {
        out.row_mut(k).assign(&a.row(r));
    }
    out
}
