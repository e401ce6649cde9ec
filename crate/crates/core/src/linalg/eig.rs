use ndarray::{Array1, Array2, ArrayView2};

use super::{frobenius, symmetry_defect};
use crate::error::{check_dim, Error, Result};

const MAX_QL_ITERATIONS: usize = 64;

/// Eigen-decomposition `A = Q·diag(values)·Qᵀ` with ascending values.
#[derive(Debug, Clone)]
pub struct SymEig {
    pub values: Array1<f64>,
    pub vectors: Array2<f64>,
}

impl SymEig {
    pub fn max(&self) -> f64 {
        self.values[self.values.len() - 1]
    }

    pub fn min(&self) -> f64 {
        self.values[0]
    }

    /// `Q·f(Λ)·Qᵀ`.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Array2<f64> {
        let mut scaled = self.vectors.clone();
        for (mut col, &v) in scaled.columns_mut().into_iter().zip(self.values.iter()) {
            col *= f(v);
        }
        scaled.dot(&self.vectors.t())
    }
}

/// Householder tridiagonalisation followed by implicit QL.
///
/// The input is symmetrised first; a symmetry defect above
/// `1e-8·‖A‖_F` is rejected.
pub fn sym_eig(a: &ArrayView2<f64>) -> Result<SymEig> {
    let (n, nc) = a.dim();
    check_dim("sym_eig (square)", n, nc)?;
    if n == 0 {
        return Ok(SymEig {
            values: Array1::zeros(0),
            vectors: Array2::zeros((0, 0)),
        });
    }
    let norm = frobenius(a);
    let defect = symmetry_defect(a);
    if defect > 1e-8 * norm {
        return Err(Error::InvalidArgument(format!(
            "sym_eig input not symmetric (defect {defect:e})"
        )));
    }
    let mut v = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            v[i * n + j] = 0.5 * (a[[i, j]] + a[[j, i]]);
        }
    }
    let mut d = vec![0.0; n];
    let mut e = vec![0.0; n];
    tred2(n, &mut v, &mut d, &mut e);
    tql2(n, &mut v, &mut d, &mut e)?;
    Ok(SymEig {
        values: Array1::from(d),
        vectors: Array2::from_shape_vec((n, n), v).expect("shape"),
    })
}

// Symmetric Householder reduction to tridiagonal form (EISPACK tred2).
fn tred2(n: usize, v: &mut [f64], d: &mut [f64], e: &mut [f64]) {
    for j in 0..n {
        d[j] = v[(n - 1) * n + j];
    }
    for i in (1..n).rev() {
        let mut scale = 0.0;
        let mut h = 0.0;
        for k in 0..i {
            scale += d[k].abs();
        }
        if scale == 0.0 {
            e[i] = d[i - 1];
            for j in 0..i {
                d[j] = v[(i - 1) * n + j];
                v[i * n + j] = 0.0;
                v[j * n + i] = 0.0;
            }
        } else {
            for k in 0..i {
                d[k] /= scale;
                h += d[k] * d[k];
            }
            let mut f = d[i - 1];
            let mut g = h.sqrt();
            if f > 0.0 {
                g = -g;
            }
            e[i] = scale * g;
            h -= f * g;
            d[i - 1] = f - g;
            for j in 0..i {
                e[j] = 0.0;
            }
            for j in 0..i {
                f = d[j];
                v[j * n + i] = f;
                g = e[j] + v[j * n + j] * f;
                for k in (j + 1)..i {
                    g += v[k * n + j] * d[k];
                    e[k] += v[k * n + j] * f;
                }
                e[j] = g;
            }
            f = 0.0;
            for j in 0..i {
                e[j] /= h;
                f += e[j] * d[j];
            }
            let hh = f / (h + h);
            for j in 0..i {
                e[j] -= hh * d[j];
            }
            for j in 0..i {
                f = d[j];
                g = e[j];
                for k in j..i {
                    v[k * n + j] -= f * e[k] + g * d[k];
                }
                d[j] = v[(i - 1) * n + j];
                v[i * n + j] = 0.0;
            }
        }
        d[i] = h;
    }

    // accumulate transformations
    for i in 0..n.saturating_sub(1) {
        v[(n - 1) * n + i] = v[i * n + i];
        v[i * n + i] = 1.0;
        let h = d[i + 1];
        if h != 0.0 {
            for k in 0..=i {
                d[k] = v[k * n + i + 1] / h;
            }
            for j in 0..=i {
                let mut g = 0.0;
                for k in 0..=i {
                    g += v[k * n + i + 1] * v[k * n + j];
                }
                for k in 0..=i {
                    v[k * n + j] -= g * d[k];
                }
            }
        }
        for k in 0..=i {
            v[k * n + i + 1] = 0.0;
        }
    }
    for j in 0..n {
        d[j] = v[(n - 1) * n + j];
        v[(n - 1) * n + j] = 0.0;
    }
    v[(n - 1) * n + n - 1] = 1.0;
    e[0] = 0.0;
}

// Implicit QL on the tridiagonal (EISPACK tql2), then ascending sort.
fn tql2(n: usize, v: &mut [f64], d: &mut [f64], e: &mut [f64]) -> Result<()> {
    for i in 1..n {
        e[i - 1] = e[i];
    }
    e[n - 1] = 0.0;

    let mut f = 0.0;
    let mut tst1: f64 = 0.0;
    let eps = f64::EPSILON;
    for l in 0..n {
        tst1 = tst1.max(d[l].abs() + e[l].abs());
        let mut m = l;
        while m < n {
            if e[m].abs() <= eps * tst1 {
                break;
            }
            m += 1;
        }
        if m > l {
            let mut iter = 0;
            loop {
                iter += 1;
                if iter > MAX_QL_ITERATIONS {
                    return Err(Error::NoConvergence("symmetric QL iteration"));
                }
                let mut g = d[l];
                let mut p = (d[l + 1] - g) / (2.0 * e[l]);
                let mut r = p.hypot(1.0);
                if p < 0.0 {
                    r = -r;
                }
                d[l] = e[l] / (p + r);
                d[l + 1] = e[l] * (p + r);
                let dl1 = d[l + 1];
                let mut h = g - d[l];
                for di in d.iter_mut().take(n).skip(l + 2) {
                    *di -= h;
                }
                f += h;

                p = d[m];
                let mut c = 1.0;
                let mut c2 = c;
                let mut c3 = c;
                let el1 = e[l + 1];
                let mut s = 0.0;
                let mut s2 = 0.0;
                for i in (l..m).rev() {
                    c3 = c2;
                    c2 = c;
                    s2 = s;
                    g = c * e[i];
                    h = c * p;
                    r = p.hypot(e[i]);
                    e[i + 1] = s * r;
                    s = e[i] / r;
                    c = p / r;
                    p = c * d[i] - s * g;
                    d[i + 1] = h + s * (c * g + s * d[i]);
                    for k in 0..n {
                        h = v[k * n + i + 1];
                        v[k * n + i + 1] = s * v[k * n + i] + c * h;
                        v[k * n + i] = c * v[k * n + i] - s * h;
                    }
                }
                p = -s * s2 * c3 * el1 * e[l] / dl1;
                e[l] = s * p;
                d[l] = c * p;
                if e[l].abs() <= eps * tst1 {
                    break;
                }
            }
        }
        d[l] += f;
        e[l] = 0.0;
    }

    // selection sort, ascending
    for i in 0..n.saturating_sub(1) {
        let mut k = i;
        let mut p = d[i];
        for (j, &dj) in d.iter().enumerate().take(n).skip(i + 1) {
            if dj < p {
                k = j;
                p = dj;
            }
        }
        if k != i {
            d[k] = d[i];
            d[i] = p;
            for j in 0..n {
                v.swap(j * n + i, j * n + k);
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::qr_orthonormal;
    use ndarray::array;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn diagonal_sorted() {
        let a = Array2::from_diag(&array![3.0, 1.0, 2.0]);
        let e = sym_eig(&a.view()).unwrap();
        assert_eq!(e.values.to_vec(), vec![1.0, 2.0, 3.0]);
    }

    #[test]
    fn one_by_one() {
        let a = array![[5.0]];
        let e = sym_eig(&a.view()).unwrap();
        assert_eq!(e.values[0], 5.0);
        assert_eq!(e.vectors[[0, 0]].abs(), 1.0);
    }

    #[test]
    fn recovers_constructed_spectrum() {
        let n = 40;
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let g = Array2::from_shape_fn((n, n), |_| rng.random_range(-1.0..1.0));
        let q = qr_orthonormal(&g.view());
        let lambda: Vec<f64> = (0..n).map(|k| -3.0 + 0.25 * k as f64).collect();
        let a = q.dot(&Array2::from_diag(&Array1::from(lambda.clone()))).dot(&q.t());
        let e = sym_eig(&a.view()).unwrap();
        for (x, y) in e.values.iter().zip(&lambda) {
            assert!((x - y).abs() < 1e-9);
        }
        let resid = a.dot(&e.vectors) - e.vectors.dot(&Array2::from_diag(&e.values));
        assert!(frobenius(&resid.view()) <= 1e-8 * frobenius(&a.view()));
        let ortho = e.vectors.t().dot(&e.vectors) - Array2::<f64>::eye(n);
        assert!(frobenius(&ortho.view()) < 1e-9);
        let back = e.map(|x| x);
        assert!(frobenius(&(&back - &a).view()) < 1e-10);
    }

    #[test]
    fn rejects_asymmetric() {
        let a = array![[1.0, 2.0], [0.0, 1.0]];
        assert!(sym_eig(&a.view()).is_err());
    }

    #[test]
    fn degenerate_spectrum() {
        let a = Array2::<f64>::ones((6, 6));
        let e = sym_eig(&a.view()).unwrap();
        for k in 0..5 {
            assert!(e.values[k].abs() < 1e-12);
        }
        assert!((e.values[5] - 6.0).abs() < 1e-12);
    }
}
