//! Domain types: the real-space grid, the electronic structure on it, the
//! periodic Coulomb operator and the occupied/unoccupied energy
//! differences.
//!
//! Inner products of wavefunctions are weighted by the grid volume
//! element `dV`, so `Ψᵀ·Ψ·dV = I`. Pair functions and the response matrices
//! built from them use plain grid sums; the `dV` measure is carried by the
//! Coulomb operator instead (see [`CoulombOperator`]).

mod coulomb;
mod synthetic;
mod wfn;

pub use coulomb::{apply_coulomb, build_coulomb, CoulombMode, CoulombOperator, DENSE_COULOMB_LIMIT};
pub use synthetic::build_synthetic_system;
pub use wfn::{load_system, read_system, save_system, write_system, WFN_MAGIC};

use ndarray::{Array1, Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::linalg::frobenius;

/// Largest tolerated `‖ΨᵀΨ·dV − I‖_F` for a valid system.
pub const ORTHONORMALITY_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    dims: [usize; 3],
    cell: [f64; 3],
}

impl Grid {
    pub fn new(dims: [usize; 3], cell: [f64; 3]) -> Result<Self> {
        if dims.iter().any(|&n| n < 2) {
            return Err(Error::InvalidGrid(format!("every dimension must be >= 2, got {dims:?}")));
        }
        if cell.iter().any(|&a| !(a.is_finite() && a > 0.0)) {
            return Err(Error::InvalidGrid(format!("cell lengths must be positive, got {cell:?}")));
        }
        Ok(Self { dims, cell })
    }

    /// Cubic-ish cell with the given spacing in bohr.
    pub fn with_spacing(dims: [usize; 3], spacing: f64) -> Result<Self> {
        Self::new(dims, dims.map(|n| n as f64 * spacing))
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    pub fn cell(&self) -> [f64; 3] {
        self.cell
    }

    pub fn n_r(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn volume(&self) -> f64 {
        self.cell.iter().product()
    }

    pub fn dv(&self) -> f64 {
        self.volume() / self.n_r() as f64
    }

    /// Signed integer frequency for index `m` along an axis of length `n`.
    pub(crate) fn frequency(m: usize, n: usize) -> f64 {
        if m <= n / 2 {
            m as f64
        } else {
            m as f64 - n as f64
        }
    }

    /// `|G|²` for every reciprocal grid point, in grid (row-major) order.
    pub fn g_squared(&self) -> Array1<f64> {
        let [n1, n2, n3] = self.dims;
        let b = self.cell.map(|a| 2.0 * std::f64::consts::PI / a);
        let mut out = Array1::zeros(self.n_r());
        for i1 in 0..n1 {
            let g1 = Self::frequency(i1, n1) * b[0];
            for i2 in 0..n2 {
                let g2 = Self::frequency(i2, n2) * b[1];
                for i3 in 0..n3 {
                    let g3 = Self::frequency(i3, n3) * b[2];
                    out[(i1 * n2 + i2) * n3 + i3] = g1 * g1 + g2 * g2 + g3 * g3;
                }
            }
        }
        out
    }
}

/// Real orthonormal wavefunctions (columns of `psi`) with band energies
/// and exchange-correlation expectation values, all in hartree.
#[derive(Debug, Clone, PartialEq)]
pub struct ElectronicStructure {
    pub grid: Grid,
    pub psi: Array2<f64>,
    pub energies: Array1<f64>,
    pub vxc: Array1<f64>,
    pub nv: usize,
    pub nc: usize,
}

impl ElectronicStructure {
    /// Validates every invariant: shapes, orthonormality, sorted
    /// energies and a positive gap.
    pub fn new(
        grid: Grid,
        psi: Array2<f64>,
        energies: Array1<f64>,
        vxc: Array1<f64>,
        nv: usize,
        nc: usize,
    ) -> Result<Self> {
        let es = Self {
            grid,
            psi,
            energies,
            vxc,
            nv,
            nc,
        };
        es.validate()?;
        Ok(es)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.n_bands();
        if self.nv == 0 || self.nc == 0 {
            return Err(Error::InvalidArgument("need at least one occupied and one unoccupied band".into()));
        }
        check_dim("psi rows (grid points)", self.grid.n_r(), self.psi.nrows())?;
        check_dim("psi columns (bands)", n, self.psi.ncols())?;
        check_dim("energies length", n, self.energies.len())?;
        check_dim("vxc length", n, self.vxc.len())?;
        if self.energies.iter().chain(self.vxc.iter()).any(|x| !x.is_finite()) {
            return Err(Error::InvalidArgument("non-finite energy".into()));
        }
        if self.energies.windows(2).into_iter().any(|w| w[1] < w[0]) {
            return Err(Error::InvalidArgument("band energies must be non-decreasing".into()));
        }
        let gap = self.gap();
        if gap <= 0.0 {
            return Err(Error::NonPositiveGap(gap));
        }
        let defect = self.orthonormality_defect();
        if !(defect <= ORTHONORMALITY_TOL) {
            return Err(Error::InvalidArgument(format!(
                "wavefunctions not orthonormal (defect {defect:e})"
            )));
        }
        Ok(())
    }

    pub fn n_bands(&self) -> usize {
        self.nv + self.nc
    }

    pub fn n_r(&self) -> usize {
        self.grid.n_r()
    }

    pub fn occupied(&self) -> ArrayView2<'_, f64> {
        self.psi.slice(ndarray::s![.., ..self.nv])
    }

    pub fn unoccupied(&self) -> ArrayView2<'_, f64> {
        self.psi.slice(ndarray::s![.., self.nv..])
    }

    /// `q = ε_LUMO − ε_HOMO`.
    pub fn gap(&self) -> f64 {
        self.energies[self.nv] - self.energies[self.nv - 1]
    }

    /// `Q = ε_top − ε_HOMO`.
    pub fn max_transition(&self) -> f64 {
        self.energies[self.n_bands() - 1] - self.energies[self.nv - 1]
    }

    pub fn orthonormality_defect(&self) -> f64 {
        let mut s = self.psi.t().dot(&self.psi) * self.grid.dv();
        for k in 0..s.nrows() {
            s[[k, k]] -= 1.0;
        }
        frobenius(&s.view())
    }

    pub fn omega(&self) -> OmegaDiagonal {
        OmegaDiagonal::new(self.energies.as_slice().expect("contiguous"), self.nv, self.nc)
    }
}

/// Diagonal of Ω: entry `i + N_v·j` is `ε_i − ε_{N_v+j}`.
#[derive(Debug, Clone, PartialEq)]
pub struct OmegaDiagonal {
    pub entries: Array1<f64>,
    pub nv: usize,
    pub nc: usize,
}

impl OmegaDiagonal {
    pub fn new(energies: &[f64], nv: usize, nc: usize) -> Self {
        let mut entries = Array1::zeros(nv * nc);
        for j in 0..nc {
            for i in 0..nv {
                entries[i + nv * j] = energies[i] - energies[nv + j];
            }
        }
        Self { entries, nv, nc }
    }

    pub fn pair_index(&self, i: usize, j: usize) -> usize {
        i + self.nv * j
    }

    /// Smallest `|ε_i − ε_j|`, which is the gap q.
    pub fn min_abs(&self) -> f64 {
        self.entries.iter().map(|x| x.abs()).fold(f64::INFINITY, f64::min)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_invariants() {
        let g = Grid::new([4, 5, 6], [4.0, 5.0, 6.0]).unwrap();
        assert_eq!(g.n_r(), 120);
        assert!((g.dv() - 1.0).abs() < 1e-15);
        assert!(Grid::new([1, 4, 4], [1.0; 3]).is_err());
        assert!(Grid::new([4, 4, 4], [1.0, 0.0, 1.0]).is_err());
    }

    #[test]
    fn g_squared_zero_at_origin_and_symmetric() {
        let g = Grid::new([4, 3, 2], [4.0, 3.0, 2.0]).unwrap();
        let g2 = g.g_squared();
        assert_eq!(g2[0], 0.0);
        // index 1 and n-1 along the first axis carry opposite frequencies
        assert!((g2[6] - g2[3 * 6]).abs() < 1e-14);
    }

    #[test]
    fn omega_entries_negative_with_gap_minimum() {
        let e = [-1.0, -0.3, 0.0, 0.5, 2.0];
        let om = OmegaDiagonal::new(&e, 3, 2);
        assert!(om.entries.iter().all(|&x| x < 0.0));
        assert_eq!(om.min_abs(), 0.5);
        assert_eq!(om.entries[om.pair_index(1, 1)], -0.3 - 2.0);
    }
}
