use ndarray::{Array1, Array2, ArrayView2};
use num_complex::Complex64;
use rayon::prelude::*;
use std::f64::consts::PI;

use super::Grid;
use crate::error::{check_dim, Error, Result};
use crate::linalg::{symmetrize, Dft3, Direction};

/// Dense materialisation is refused above this many grid points.
pub const DENSE_COULOMB_LIMIT: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CoulombMode {
    ReciprocalDiagonal,
    Dense,
}

/// Periodic Coulomb interaction on the grid.
///
/// As a matrix acting on grid samples it is `dV·F⁻¹·diag(v)·F` with the
/// unitary transform `F` and `v(G) = 4π/|G|²`, `v(0) = 0`. The `dV`
/// factor makes `xᵀ·V·y` the continuum double integral of
/// `x(r)·V(r, r′)·y(r′)` for grid samples `x`, `y`.
#[derive(Debug, Clone)]
pub struct CoulombOperator {
    grid: Grid,
    mode: CoulombMode,
    kernel: Array1<f64>,
    dense: Option<Array2<f64>>,
    plan: Dft3,
}

pub fn build_coulomb(grid: &Grid, mode: CoulombMode) -> Result<CoulombOperator> {
    let g2 = grid.g_squared();
    let kernel = g2.mapv(|x| if x == 0.0 { 0.0 } else { 4.0 * PI / x });
    let plan = Dft3::new(grid.dims());
    let mut op = CoulombOperator {
        grid: *grid,
        mode,
        kernel,
        dense: None,
        plan,
    };
    if mode == CoulombMode::Dense {
        op.dense = Some(op.materialize()?);
    }
    Ok(op)
}

pub fn apply_coulomb(v: &CoulombOperator, x: &ArrayView2<f64>) -> Result<Array2<f64>> {
    v.apply(x)
}

impl CoulombOperator {
    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn mode(&self) -> CoulombMode {
        self.mode
    }

    /// Reciprocal-space values `v(G)` in grid order.
    pub fn kernel(&self) -> &Array1<f64> {
        &self.kernel
    }

    pub fn dense_matrix(&self) -> Option<&Array2<f64>> {
        self.dense.as_ref()
    }

    /// Returns `V·X` for the columns of `X`.
    pub fn apply(&self, x: &ArrayView2<f64>) -> Result<Array2<f64>> {
        check_dim("apply_coulomb rows", self.grid.n_r(), x.nrows())?;
        if let Some(d) = &self.dense {
            return Ok(d.dot(x));
        }
        self.apply_reciprocal(x)
    }

    /// Always uses the transform path, whatever the mode.
    pub fn apply_reciprocal(&self, x: &ArrayView2<f64>) -> Result<Array2<f64>> {
        let n_r = self.grid.n_r();
        check_dim("apply_coulomb rows", n_r, x.nrows())?;
        let dv = self.grid.dv();
        let cols: Vec<Vec<f64>> = (0..x.ncols())
            .into_par_iter()
            .map(|j| {
                let mut buf: Vec<Complex64> =
                    x.column(j).iter().map(|&v| Complex64::new(v, 0.0)).collect();
                self.plan.transform(&mut buf, Direction::Forward).expect("length checked");
                for (b, &k) in buf.iter_mut().zip(self.kernel.iter()) {
                    *b *= k * dv;
                }
                self.plan.transform(&mut buf, Direction::Inverse).expect("length checked");
                buf.into_iter().map(|c| c.re).collect()
            })
            .collect();
        let mut out = Array2::zeros((n_r, x.ncols()));
        for (j, c) in cols.into_iter().enumerate() {
            out.column_mut(j).assign(&Array1::from(c));
        }
        Ok(out)
    }

    /// Dense `N_r × N_r` matrix. The operator is a circulant on the
    /// periodic grid, so one inverse transform gives every entry.
    pub fn materialize(&self) -> Result<Array2<f64>> {
        let n_r = self.grid.n_r();
        if n_r > DENSE_COULOMB_LIMIT {
            return Err(Error::DenseGuard {
                what: "dense Coulomb matrix",
                size: n_r,
                limit: DENSE_COULOMB_LIMIT,
            });
        }
        if let Some(d) = &self.dense {
            return Ok(d.clone());
        }
        // column 0 is V·e_0
        let mut e0 = Array2::zeros((n_r, 1));
        e0[[0, 0]] = 1.0;
        let c = self.apply_reciprocal(&e0.view())?;
        let [n1, n2, n3] = self.grid.dims();
        let mut m = Array2::zeros((n_r, n_r));
        for a1 in 0..n1 {
            for a2 in 0..n2 {
                for a3 in 0..n3 {
                    let r = (a1 * n2 + a2) * n3 + a3;
                    for b1 in 0..n1 {
                        let d1 = (a1 + n1 - b1) % n1;
                        for b2 in 0..n2 {
                            let d2 = (a2 + n2 - b2) % n2;
                            for b3 in 0..n3 {
                                let d3 = (a3 + n3 - b3) % n3;
                                m[[r, (b1 * n2 + b2) * n3 + b3]] = c[[(d1 * n2 + d2) * n3 + d3, 0]];
                            }
                        }
                    }
                }
            }
        }
        symmetrize(&mut m);
        Ok(m)
    }
}
