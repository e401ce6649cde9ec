use ndarray::{Array2, ArrayView2};

use super::norm_inf;
use crate::error::{check_dim, Error, Result};

/// Relative pivot threshold below which a matrix is reported singular.
pub const SINGULAR_PIVOT_REL: f64 = 1e-14;

/// Packed `L\U` factors of `P·A = L·U` (unit lower `L`), row-major.
#[derive(Debug, Clone)]
pub struct LuFactors {
    n: usize,
    lu: Vec<f64>,
    /// `piv[k]` is the row swapped into position `k` at step `k`.
    pub piv: Vec<usize>,
}

impl LuFactors {
    pub fn dim(&self) -> usize {
        self.n
    }

    /// Pivot magnitudes `|U_kk|`.
    pub fn pivots(&self) -> Vec<f64> {
        (0..self.n).map(|k| self.lu[k * self.n + k].abs()).collect()
    }

    pub fn reconstruct(&self) -> Array2<f64> {
        let n = self.n;
        let l = Array2::from_shape_fn((n, n), |(i, j)| match i.cmp(&j) {
            std::cmp::Ordering::Greater => self.lu[i * n + j],
            std::cmp::Ordering::Equal => 1.0,
            std::cmp::Ordering::Less => 0.0,
        });
        let u = Array2::from_shape_fn((n, n), |(i, j)| if i <= j { self.lu[i * n + j] } else { 0.0 });
        let mut pa = l.dot(&u);
        // undo the row interchanges
        for k in (0..n).rev() {
            let p = self.piv[k];
            if p != k {
                for j in 0..n {
                    pa.swap([k, j], [p, j]);
                }
            }
        }
        pa
    }

    /// Solves `A·X = B` for all columns of `B`.
    pub fn solve(&self, b: &ArrayView2<f64>) -> Result<Array2<f64>> {
        let n = self.n;
        check_dim("lu_solve rhs rows", n, b.nrows())?;
        let m = b.ncols();
        // logical (row-major) order regardless of the input layout
        let mut x: Vec<f64> = b.iter().copied().collect();
        for k in 0..n {
            let p = self.piv[k];
            if p != k {
                for j in 0..m {
                    x.swap(k * m + j, p * m + j);
                }
            }
        }
        // forward substitution, unit lower
        for i in 0..n {
            let (done, rest) = x.split_at_mut(i * m);
            let row_i = &mut rest[..m];
            for k in 0..i {
                let l = self.lu[i * n + k];
                if l != 0.0 {
                    let row_k = &done[k * m..(k + 1) * m];
                    for (xi, xk) in row_i.iter_mut().zip(row_k) {
                        *xi -= l * xk;
                    }
                }
            }
        }
        // back substitution
        for i in (0..n).rev() {
            let (head, tail) = x.split_at_mut((i + 1) * m);
            let row_i = &mut head[i * m..];
            for k in (i + 1)..n {
                let u = self.lu[i * n + k];
                if u != 0.0 {
                    let row_k = &tail[(k - i - 1) * m..(k - i) * m];
                    for (xi, xk) in row_i.iter_mut().zip(row_k) {
                        *xi -= u * xk;
                    }
                }
            }
            let d = self.lu[i * n + i];
            for xi in row_i.iter_mut() {
                *xi /= d;
            }
        }
        Ok(Array2::from_shape_vec((n, m), x).expect("shape"))
    }
}

/// LU with partial pivoting. Fails when a pivot falls below
/// `1e-14·‖A‖_∞`.
pub fn lu_factor(a: &ArrayView2<f64>) -> Result<LuFactors> {
    let (n, nc) = a.dim();
    check_dim("lu_factor (square)", n, nc)?;
    let tol = SINGULAR_PIVOT_REL * norm_inf(a);
    let mut lu: Vec<f64> = a.rows().into_iter().flat_map(|r| r.to_vec()).collect();
    let mut piv = vec![0; n];
    for k in 0..n {
        let mut p = k;
        let mut best = lu[k * n + k].abs();
        for i in (k + 1)..n {
            let v = lu[i * n + k].abs();
            if v > best {
                best = v;
                p = i;
            }
        }
        piv[k] = p;
        if best <= tol {
            return Err(Error::Singular {
                pivot: k,
                magnitude: best,
            });
        }
        if p != k {
            for j in 0..n {
                lu.swap(k * n + j, p * n + j);
            }
        }
        let pivot = lu[k * n + k];
        let (upper, lower) = lu.split_at_mut((k + 1) * n);
        let row_k = &upper[k * n + k + 1..(k + 1) * n];
        for i in 0..(n - k - 1) {
            let row_i = &mut lower[i * n..(i + 1) * n];
            let l = row_i[k] / pivot;
            row_i[k] = l;
            if l != 0.0 {
                for (x, u) in row_i[k + 1..].iter_mut().zip(row_k) {
                    *x -= l * u;
                }
            }
        }
    }
    Ok(LuFactors { n, lu, piv })
}

pub fn lu_solve(a: &ArrayView2<f64>, b: &ArrayView2<f64>) -> Result<Array2<f64>> {
    lu_factor(a)?.solve(b)
}

pub fn lu_invert(a: &ArrayView2<f64>) -> Result<Array2<f64>> {
    let f = lu_factor(a)?;
    f.solve(&Array2::eye(f.n).view())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::frobenius;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn well_conditioned(n: usize, seed: u64) -> Array2<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut a = Array2::from_shape_fn((n, n), |_| rng.random_range(-1.0..1.0));
        for i in 0..n {
            a[[i, i]] += n as f64;
        }
        a
    }

    #[test]
    fn scaled_identity() {
        let a = Array2::<f64>::eye(3) * 2.0;
        let inv = lu_invert(&a.view()).unwrap();
        assert!(frobenius(&(&inv - &(Array2::<f64>::eye(3) * 0.5)).view()) < 1e-16);
    }

    #[test]
    fn random_solve_residual() {
        let a = well_conditioned(16, 4);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let b = Array2::from_shape_fn((16, 3), |_| rng.random_range(-1.0..1.0));
        let x = lu_solve(&a.view(), &b.view()).unwrap();
        let res = frobenius(&(&a.dot(&x) - &b).view()) / frobenius(&b.view());
        assert!(res <= 1e-11, "{res}");
    }

    #[test]
    fn zero_matrix_is_singular() {
        let a = Array2::<f64>::zeros((4, 4));
        match lu_invert(&a.view()) {
            Err(Error::Singular { pivot, .. }) => assert_eq!(pivot, 0),
            other => panic!("expected singular, got {other:?}"),
        }
    }

    #[test]
    fn rank_deficient_reports_pivot() {
        let mut a = well_conditioned(5, 2);
        let r0 = a.row(0).to_owned();
        a.row_mut(4).assign(&(&r0 * 3.0));
        assert!(matches!(lu_factor(&a.view()), Err(Error::Singular { .. })));
    }

    #[test]
    fn reconstruction_and_two_sided_inverse() {
        let n = 24;
        let a = well_conditioned(n, 13);
        let f = lu_factor(&a.view()).unwrap();
        let rec = frobenius(&(&f.reconstruct() - &a).view());
        assert!(rec <= 1e-12 * frobenius(&a.view()));
        let inv = lu_invert(&a.view()).unwrap();
        let left = inv.dot(&a);
        let right = a.dot(&inv);
        assert!(frobenius(&(&left - &right).view()) <= 1e-9 * n as f64);
        assert!(frobenius(&(&right - &Array2::<f64>::eye(n)).view()) < 1e-12);
    }

    #[test]
    fn non_square_rejected() {
        let a = Array2::<f64>::zeros((3, 4));
        assert!(matches!(lu_factor(&a.view()), Err(Error::DimensionMismatch { .. })));
    }
}
