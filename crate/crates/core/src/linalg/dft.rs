use num_complex::Complex64;
use std::f64::consts::PI;

use crate::error::{check_dim, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Forward,
    Inverse,
}

/// Unitary 3D discrete Fourier transform over a row-major grid
/// (`index = (i1·n2 + i2)·n3 + i3`), applied axis by axis.
///
/// Each axis is a direct O(n²) transform with a precomputed table, so a
/// full transform costs `N_r·(n1 + n2 + n3)` complex multiplies.
#[derive(Debug, Clone)]
pub struct Dft3 {
    dims: [usize; 3],
    // roots[a][k] = exp(-2πi k / n_a) / sqrt(n_a)
    roots: [Vec<Complex64>; 3],
}

impl Dft3 {
    pub fn new(dims: [usize; 3]) -> Self {
        let table = |n: usize| -> Vec<Complex64> {
            let s = 1.0 / (n as f64).sqrt();
            (0..n)
                .map(|k| Complex64::from_polar(s, -2.0 * PI * k as f64 / n as f64))
                .collect()
        };
        Self {
            dims,
            roots: [table(dims[0]), table(dims[1]), table(dims[2])],
        }
    }

    pub fn len(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn transform(&self, data: &mut [Complex64], direction: Direction) -> Result<()> {
        check_dim("dft input length", self.len(), data.len())?;
        let [n1, n2, n3] = self.dims;
        let strides = [n2 * n3, n3, 1];
        let mut line = Vec::new();
        let mut out = Vec::new();
        for axis in 0..3 {
            let n = self.dims[axis];
            let stride = strides[axis];
            let roots = &self.roots[axis];
            line.resize(n, Complex64::new(0.0, 0.0));
            out.resize(n, Complex64::new(0.0, 0.0));
            // every line along `axis` starts at an index with zero component on that axis
            let (outer, inner) = match axis {
                0 => (1, n2 * n3),
                1 => (n1, n3),
                _ => (n1 * n2, 1),
            };
            let block = n * stride;
            for o in 0..outer {
                for i in 0..inner {
                    let start = if axis == 2 { o * n3 } else { o * block + i };
                    for (k, l) in line.iter_mut().enumerate() {
                        *l = data[start + k * stride];
                    }
                    for (k, ok) in out.iter_mut().enumerate() {
                        let mut acc = Complex64::new(0.0, 0.0);
                        for (j, x) in line.iter().enumerate() {
                            let w = roots[(j * k) % n];
                            let w = match direction {
                                Direction::Forward => w,
                                Direction::Inverse => w.conj(),
                            };
                            acc += w * x;
                        }
                        *ok = acc;
                    }
                    for (k, v) in out.iter().enumerate() {
                        data[start + k * stride] = *v;
                    }
                }
            }
        }
        Ok(())
    }
}

/// One-shot unitary transform of `x` over a grid with the given dims.
pub fn dft(dims: [usize; 3], x: &[Complex64], direction: Direction) -> Result<Vec<Complex64>> {
    let plan = Dft3::new(dims);
    let mut y = x.to_vec();
    plan.transform(&mut y, direction)?;
    Ok(y)
}
