use ndarray::{Array2, ArrayView2};

/// Householder QR with greedy column pivoting: `A·Π = Q·R`.
///
/// `perm[k]` is the original index of the column selected at step `k`.
#[derive(Debug, Clone)]
pub struct QrcpResult {
    pub q: Array2<f64>,
    pub r: Array2<f64>,
    pub perm: Vec<usize>,
}

/// Column-major working storage for the Householder sweep. Columns are
/// kept as separate vectors so pivoting swaps are free.
struct Householder {
    m: usize,
    cols: Vec<Vec<f64>>,
    perm: Vec<usize>,
    // reflector k acts on rows k..m; stored with v[0] at row k
    reflectors: Vec<(Vec<f64>, f64)>,
    // squared norms of the trailing part (rows k..m) of every column
    norms: Vec<f64>,
}

impl Householder {
    fn new(a: &ArrayView2<f64>) -> Self {
        let (m, n) = a.dim();
        let cols: Vec<Vec<f64>> = (0..n).map(|j| a.column(j).to_vec()).collect();
        let norms = cols.iter().map(|c| c.iter().map(|x| x * x).sum()).collect();
        Self {
            m,
            cols,
            perm: (0..n).collect(),
            reflectors: Vec::new(),
            norms,
        }
    }

    fn step(&mut self, k: usize, pivot: bool) {
        let n = self.cols.len();
        if pivot {
            // strict comparison: lowest index wins on equal norms
            let mut best = k;
            for j in (k + 1)..n {
                if self.norms[j] > self.norms[best] {
                    best = j;
                }
            }
            if best != k {
                self.cols.swap(k, best);
                self.perm.swap(k, best);
                self.norms.swap(k, best);
            }
        }

        let m = self.m;
        let x = &self.cols[k][k..m];
        let xnorm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        if xnorm == 0.0 {
            self.reflectors.push((vec![0.0; m - k], 0.0));
            self.update_norms(k);
            return;
        }
        let alpha = if x[0] >= 0.0 { -xnorm } else { xnorm };
        let mut v = x.to_vec();
        v[0] -= alpha;
        let vtv: f64 = v.iter().map(|t| t * t).sum();
        let beta = if vtv == 0.0 { 0.0 } else { 2.0 / vtv };

        {
            let col = &mut self.cols[k];
            col[k] = alpha;
            for c in col[k + 1..m].iter_mut() {
                *c = 0.0;
            }
        }
        for j in (k + 1)..n {
            let col = &mut self.cols[j][k..m];
            let s: f64 = beta * v.iter().zip(col.iter()).map(|(a, b)| a * b).sum::<f64>();
            if s != 0.0 {
                for (c, vi) in col.iter_mut().zip(v.iter()) {
                    *c -= s * vi;
                }
            }
        }
        self.reflectors.push((v, beta));
        self.update_norms(k);
    }

    // trailing norms over rows k+1..m, recomputed exactly
    fn update_norms(&mut self, k: usize) {
        for j in (k + 1)..self.cols.len() {
            self.norms[j] = self.cols[j][k + 1..self.m].iter().map(|x| x * x).sum();
        }
    }

    fn r(&self, kmax: usize) -> Array2<f64> {
        let n = self.cols.len();
        let mut r = Array2::zeros((kmax, n));
        for j in 0..n {
            for i in 0..kmax.min(j + 1) {
                r[[i, j]] = self.cols[j][i];
            }
        }
        r
    }

    fn q(&self, kmax: usize) -> Array2<f64> {
        let m = self.m;
        let mut q = Array2::zeros((m, kmax));
        for j in 0..kmax {
            q[[j, j]] = 1.0;
        }
        for (k, (v, beta)) in self.reflectors.iter().enumerate().rev() {
            if *beta == 0.0 {
                continue;
            }
            for j in 0..kmax {
                let mut s = 0.0;
                for (i, vi) in v.iter().enumerate() {
                    s += vi * q[[k + i, j]];
                }
                s *= beta;
                if s != 0.0 {
                    for (i, vi) in v.iter().enumerate() {
                        q[[k + i, j]] -= s * vi;
                    }
                }
            }
        }
        q
    }
}

pub fn qrcp(a: &ArrayView2<f64>) -> QrcpResult {
    let (m, n) = a.dim();
    let kmax = m.min(n);
    let mut h = Householder::new(a);
    for k in 0..kmax {
        h.step(k, true);
    }
    QrcpResult {
        q: h.q(kmax),
        r: h.r(kmax),
        perm: h.perm,
    }
}

/// First `count` pivot columns of a column-pivoted QR, in selection order.
/// Stops the factorization after `count` steps.
pub fn qrcp_pivots(a: &ArrayView2<f64>, count: usize) -> Vec<usize> {
    let (m, n) = a.dim();
    let steps = count.min(n);
    let mut h = Householder::new(a);
    for k in 0..steps.min(m) {
        h.step(k, true);
    }
    // past min(m, n) every trailing column is zero; keep index order
    h.perm.truncate(steps);
    h.perm
}

/// Orthonormal basis for the columns of a full-column-rank `a` (thin Q of
/// an unpivoted Householder QR).
pub fn qr_orthonormal(a: &ArrayView2<f64>) -> Array2<f64> {
    let (m, n) = a.dim();
    let kmax = m.min(n);
    let mut h = Householder::new(a);
    for k in 0..kmax {
        h.step(k, false);
    }
    h.q(kmax)
}
