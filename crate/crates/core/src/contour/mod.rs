//! The coupled coefficient matrix `T = C·Ω⁻¹·Cᵀ` on the interpolation
//! points, where `C` holds the pair products `ψ_i(r_μ)·ψ_j(r_μ)` for
//! occupied `i` and unoccupied `j`.
//!
//! [`coupled_coefficients_direct`] sums the `N_v·N_c` energy denominators
//! explicitly. [`coupled_coefficients_contour`] writes each denominator as
//! a Cauchy integral around the unoccupied spectrum,
//!
//! ```text
//! T = −1/(2πi) ∮ J(λ) dλ,   J(λ) = (Ψ_v·(λ−ε_v)⁻¹·Ψ_vᵀ) ⊙ (Ψ_c·(λ−ε_c)⁻¹·Ψ_cᵀ),
//! ```
//!
//! and evaluates it on the conformal elliptic contour with nested
//! trapezoid rules, so the cost no longer grows with `N_v·N_c` but with
//! `N_v + N_c` per node.

pub mod elliptic;
pub mod quad;

pub use elliptic::{ellip_k, jacobi_complex, jacobi_sn_cn_dn};

use ndarray::{Array1, Array2, ArrayView2};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{check_dim, Error, Result};
use crate::linalg::{frobenius, symmetrize};

pub const DEFAULT_DELTA_REL: f64 = 1e-7;
pub const DEFAULT_MAX_NODES: usize = 4097;

/// The adaptive rule starts with `2^FIRST_LEVEL + 1` nodes.
pub const FIRST_LEVEL: u32 = 4;

/// `Q/q` at or below this ratio bypasses the contour.
pub const BYPASS_RATIO: f64 = 1.0 + 1e-12;

// nodes summed sequentially inside one parallel task
const NODE_CHUNK: usize = 16;

/// Parameters of the elliptic contour enclosing the unoccupied spectrum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContourSpec {
    /// Gap `q = ε_LUMO − ε_HOMO`.
    pub q: f64,
    /// Largest transition `Q = ε_top − ε_HOMO`.
    pub big_q: f64,
    /// Elliptic modulus `r = (√(Q/q) − 1)/(√(Q/q) + 1)`.
    pub r: f64,
    /// Half-length `R = K(r)` of the integration segment.
    pub big_r: f64,
    /// Height `L` of the integration segment above the real axis.
    pub big_l: f64,
    /// Energy origin of the contour map, `ε_HOMO`.
    pub homo: f64,
    pub delta_rel: f64,
    pub max_nodes: usize,
    /// Set when `Q/q ≈ 1`; the direct sum must be used instead.
    pub bypass: bool,
}

impl ContourSpec {
    pub fn from_gaps(q: f64, big_q: f64, homo: f64, delta_rel: f64) -> Result<Self> {
        if !(q > 0.0) {
            return Err(Error::NonPositiveGap(q));
        }
        if !(big_q >= q) || !big_q.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "largest transition {big_q} below the gap {q}"
            )));
        }
        if !(delta_rel > 0.0 && delta_rel < 0.5) {
            return Err(Error::InvalidArgument(format!(
                "delta_rel {delta_rel} outside (0, 0.5)"
            )));
        }
        let ratio = big_q / q;
        let s = ratio.sqrt();
        let r = (s - 1.0) / (s + 1.0);
        let bypass = ratio <= BYPASS_RATIO;
        let big_r = ellip_k(r)?;
        let big_l = if bypass { 0.0 } else { contour_height(r)? };
        Ok(Self {
            q,
            big_q,
            r,
            big_r,
            big_l,
            homo,
            delta_rel,
            max_nodes: DEFAULT_MAX_NODES,
            bypass,
        })
    }

    pub fn with_max_nodes(mut self, max_nodes: usize) -> Self {
        self.max_nodes = max_nodes;
        self
    }

    /// Contour point `z` and Jacobian factor `r⁻¹·cn·dn/(r⁻¹ − sn)²` at
    /// `t = x + iL`.
    pub fn map(&self, x: f64) -> Result<(Complex64, Complex64)> {
        let (sn, cn, dn) = jacobi_complex(Complex64::new(x, self.big_l), self.r)?;
        let ri = 1.0 / self.r;
        let den = ri - sn;
        let z = (self.q * self.big_q).sqrt() * (ri + sn) / den + self.homo;
        let jac = ri * cn * dn / (den * den);
        Ok((z, jac))
    }
}

/// `L = ½∫₀^{1/r} dt/√((1+t²)(1+r²t²))`, integrated after `t = sinh s`,
/// which removes the slow `1/t` tail.
pub fn contour_height(r: f64) -> Result<f64> {
    if !(r > 0.0 && r < 1.0) {
        return Err(Error::ModulusOutOfRange(r));
    }
    let upper = (1.0 / r).asinh();
    let v = quad::integrate(|s| 1.0 / (1.0 + (r * s.sinh()).powi(2)).sqrt(), 0.0, upper, 1e-15)?;
    Ok(0.5 * v)
}

/// Builds the contour from sorted band energies: `q` and `Q` are measured
/// from `ε_HOMO = energies[N_v − 1]`.
pub fn elliptic_params(energies: &[f64], nv: usize, nc: usize, delta_rel: f64) -> Result<ContourSpec> {
    if nv == 0 || nc == 0 {
        return Err(Error::InvalidArgument("need nv >= 1 and nc >= 1".into()));
    }
    check_dim("elliptic_params energies", nv + nc, energies.len())?;
    let homo = energies[nv - 1];
    ContourSpec::from_gaps(energies[nv] - homo, energies[nv + nc - 1] - homo, homo, delta_rel)
}

/// `exp(−π²·N/(2·ln(Q/q) + 6))`.
pub fn cauchy_error_bound(spec: &ContourSpec, n_lambda: usize) -> f64 {
    (-PI * PI * n_lambda as f64 / (2.0 * (spec.big_q / spec.q).ln() + 6.0)).exp()
}

/// `T = C·Ω⁻¹·Cᵀ` with the quadrature bookkeeping that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct CoupledCoefficients {
    pub t: Array2<f64>,
    pub nodes_used: usize,
    pub est_rel_error: f64,
}

fn check_inputs(psi_v: &ArrayView2<f64>, psi_c: &ArrayView2<f64>, energies: &[f64]) -> Result<()> {
    check_dim("point-restricted wavefunctions (rows)", psi_v.nrows(), psi_c.nrows())?;
    check_dim("energies length", psi_v.ncols() + psi_c.ncols(), energies.len())
}

/// Explicit double sum over occupied/unoccupied pairs, accumulated one
/// unoccupied band at a time.
pub fn coupled_coefficients_direct(
    psi_v: &ArrayView2<f64>,
    psi_c: &ArrayView2<f64>,
    energies: &[f64],
) -> Result<CoupledCoefficients> {
    check_inputs(psi_v, psi_c, energies)?;
    let (n_mu, nv) = psi_v.dim();
    let mut t = Array2::zeros((n_mu, n_mu));
    let mut scaled = psi_v.to_owned();
    for (j, bj) in psi_c.columns().into_iter().enumerate() {
        let ej = energies[nv + j];
        for (i, (mut col, pv)) in scaled.columns_mut().into_iter().zip(psi_v.columns()).enumerate() {
            col.assign(&(&pv * (1.0 / (energies[i] - ej))));
        }
        let a = scaled.dot(&psi_v.t());
        for mu in 0..n_mu {
            for nu in 0..n_mu {
                t[[mu, nu]] += a[[mu, nu]] * bj[mu] * bj[nu];
            }
        }
    }
    symmetrize(&mut t);
    Ok(CoupledCoefficients {
        t,
        nodes_used: 0,
        est_rel_error: 0.0,
    })
}

/// Evaluates `Im(J(z(t))·z′(t)/(2√(qQ)))` at the contour nodes.
struct Integrand<'a> {
    spec: &'a ContourSpec,
    psi_v: ArrayView2<'a, f64>,
    psi_c: ArrayView2<'a, f64>,
    e_v: Array1<f64>,
    e_c: Array1<f64>,
}

impl<'a> Integrand<'a> {
    fn new(
        spec: &'a ContourSpec,
        psi_v: ArrayView2<'a, f64>,
        psi_c: ArrayView2<'a, f64>,
        energies: &[f64],
    ) -> Self {
        let nv = psi_v.ncols();
        Self {
            spec,
            psi_v,
            psi_c,
            e_v: Array1::from(energies[..nv].to_vec()),
            e_c: Array1::from(energies[nv..].to_vec()),
        }
    }

    // Ψ·diag(1/(z − ε))·Ψᵀ split into real and imaginary parts
    fn resolvent(psi: &ArrayView2<f64>, e: &Array1<f64>, z: Complex64) -> (Array2<f64>, Array2<f64>) {
        let mut re = psi.to_owned();
        let mut im = psi.to_owned();
        for k in 0..e.len() {
            let w = (z - e[k]).inv();
            re.column_mut(k).mapv_inplace(|x| x * w.re);
            im.column_mut(k).mapv_inplace(|x| x * w.im);
        }
        (re.dot(&psi.t()), im.dot(&psi.t()))
    }

    fn eval(&self, x: f64) -> Result<Array2<f64>> {
        let (z, jac) = self.spec.map(x)?;
        let (ar, ai) = Self::resolvent(&self.psi_v, &self.e_v, z);
        let (br, bi) = Self::resolvent(&self.psi_c, &self.e_c, z);
        // Im((Ar + iAi)⊙(Br + iBi)·(p + is))
        let (p, s) = (jac.re, jac.im);
        let mut out = ar.clone();
        ndarray::Zip::from(&mut out)
            .and(&ar)
            .and(&ai)
            .and(&br)
            .and(&bi)
            .for_each(|o, &ar, &ai, &br, &bi| {
                *o = s * (ar * br - ai * bi) + p * (ar * bi + ai * br);
            });
        Ok(out)
    }

    /// Weighted sum over the given abscissae in a fixed reduction order.
    fn sum(&self, nodes: &[(f64, f64)]) -> Result<Array2<f64>> {
        let n_mu = self.psi_v.nrows();
        let partials: Vec<Result<Array2<f64>>> = nodes
            .par_chunks(NODE_CHUNK)
            .map(|chunk| {
                let mut acc = Array2::zeros((n_mu, n_mu));
                for &(x, w) in chunk {
                    acc.scaled_add(w, &self.eval(x)?);
                }
                Ok(acc)
            })
            .collect();
        let mut total = Array2::zeros((n_mu, n_mu));
        for p in partials {
            total += &p?;
        }
        Ok(total)
    }

    // 2√(qQ)/π times the step length
    fn scale(&self, h: f64) -> f64 {
        2.0 * (self.spec.q * self.spec.big_q).sqrt() / PI * h
    }
}

fn check_contour(spec: &ContourSpec) -> Result<()> {
    if spec.bypass {
        return Err(Error::ContourBypassed);
    }
    Ok(())
}

/// Trapezoid rule with exactly `n_nodes` equispaced nodes on `[−R, R]`
/// (endpoints included). No adaptivity; used for convergence sweeps.
pub fn coupled_coefficients_fixed(
    psi_v: &ArrayView2<f64>,
    psi_c: &ArrayView2<f64>,
    energies: &[f64],
    spec: &ContourSpec,
    n_nodes: usize,
) -> Result<Array2<f64>> {
    check_inputs(psi_v, psi_c, energies)?;
    check_contour(spec)?;
    if n_nodes < 2 {
        return Err(Error::InvalidArgument("need at least 2 quadrature nodes".into()));
    }
    let f = Integrand::new(spec, psi_v.view(), psi_c.view(), energies);
    let h = 2.0 * spec.big_r / (n_nodes - 1) as f64;
    let nodes: Vec<(f64, f64)> = (0..n_nodes)
        .map(|k| {
            let w = if k == 0 || k == n_nodes - 1 { 0.5 } else { 1.0 };
            (-spec.big_r + k as f64 * h, w)
        })
        .collect();
    let mut t = f.sum(&nodes)? * f.scale(h);
    symmetrize(&mut t);
    Ok(t)
}

/// Nested trapezoid refinement with `2^m + 1` nodes, `m = 4, 5, …`,
/// stopping once successive levels differ by at most `delta_rel`
/// (relative Frobenius norm).
pub fn coupled_coefficients_contour(
    psi_v: &ArrayView2<f64>,
    psi_c: &ArrayView2<f64>,
    energies: &[f64],
    spec: &ContourSpec,
) -> Result<CoupledCoefficients> {
    check_inputs(psi_v, psi_c, energies)?;
    check_contour(spec)?;
    let f = Integrand::new(spec, psi_v.view(), psi_c.view(), energies);
    let big_r = spec.big_r;

    let mut intervals = 1usize << FIRST_LEVEL;
    let mut h = 2.0 * big_r / intervals as f64;
    let first: Vec<(f64, f64)> = (0..=intervals)
        .map(|k| {
            let w = if k == 0 || k == intervals { 0.5 } else { 1.0 };
            (-big_r + k as f64 * h, w)
        })
        .collect();
    let mut sum = f.sum(&first)?;
    let mut t = &sum * f.scale(h);
    let mut est = f64::INFINITY;

    loop {
        let next = 2 * intervals;
        if next + 1 > spec.max_nodes {
            let mut best = t;
            symmetrize(&mut best);
            return Err(Error::QuadratureNotConverged {
                nodes: intervals + 1,
                est_rel_error: est,
                best: Box::new(CoupledCoefficients {
                    t: best,
                    nodes_used: intervals + 1,
                    est_rel_error: est,
                }),
            });
        }
        h *= 0.5;
        let fresh: Vec<(f64, f64)> = (0..intervals)
            .map(|k| (-big_r + (2 * k + 1) as f64 * h, 1.0))
            .collect();
        sum += &f.sum(&fresh)?;
        intervals = next;
        let refined = &sum * f.scale(h);
        let norm = frobenius(&refined.view());
        est = if norm > 0.0 {
            frobenius(&(&refined - &t).view()) / norm
        } else {
            0.0
        };
        t = refined;
        if est <= spec.delta_rel {
            symmetrize(&mut t);
            return Ok(CoupledCoefficients {
                t,
                nodes_used: intervals + 1,
                est_rel_error: est,
            });
        }
    }
}

/// Contour quadrature, or the direct sum when `spec.bypass` is set.
pub fn coupled_coefficients(
    psi_v: &ArrayView2<f64>,
    psi_c: &ArrayView2<f64>,
    energies: &[f64],
    spec: &ContourSpec,
) -> Result<CoupledCoefficients> {
    if spec.bypass {
        coupled_coefficients_direct(psi_v, psi_c, energies)
    } else {
        coupled_coefficients_contour(psi_v, psi_c, energies, spec)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{rel_diff, sym_eig};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(m: usize, n: usize, seed: u64) -> Array2<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Array2::from_shape_fn((m, n), |_| rng.random_range(-1.0..1.0))
    }

    fn ladder(nv: usize, nc: usize, gap: f64, width: f64) -> Vec<f64> {
        let mut e: Vec<f64> = (0..nv).map(|i| -width * (nv - 1 - i) as f64 / nv.max(2) as f64).collect();
        e.extend((0..nc).map(|j| gap + width * j as f64 / (nc.max(2) - 1) as f64));
        e
    }

    // C·Ω⁻¹·Cᵀ with C materialised column by column
    fn explicit(psi_v: &Array2<f64>, psi_c: &Array2<f64>, e: &[f64]) -> Array2<f64> {
        let (n_mu, nv) = psi_v.dim();
        let nc = psi_c.ncols();
        let mut c = Array2::zeros((n_mu, nv * nc));
        let mut cw = Array2::zeros((n_mu, nv * nc));
        for j in 0..nc {
            for i in 0..nv {
                for mu in 0..n_mu {
                    let v = psi_v[[mu, i]] * psi_c[[mu, j]];
                    c[[mu, i + nv * j]] = v;
                    cw[[mu, i + nv * j]] = v / (e[i] - e[nv + j]);
                }
            }
        }
        cw.dot(&c.t())
    }

    #[test]
    fn modulus_and_bypass() {
        let s = ContourSpec::from_gaps(1.0, 4.0, 0.0, 1e-7).unwrap();
        assert_eq!(s.r, 1.0 / 3.0);
        assert!(!s.bypass);
        assert!((s.big_r - ellip_k(1.0 / 3.0).unwrap()).abs() < 1e-15);
        let d = ContourSpec::from_gaps(0.7, 0.7, 0.0, 1e-7).unwrap();
        assert_eq!(d.r, 0.0);
        assert!(d.bypass);
        assert!(matches!(ContourSpec::from_gaps(0.0, 1.0, 0.0, 1e-7), Err(Error::NonPositiveGap(_))));
        assert!(matches!(
            elliptic_params(&[0.0, 1.0, 1.0], 2, 1, 1e-7),
            Err(Error::NonPositiveGap(_))
        ));
    }

    #[test]
    fn height_matches_plain_quadrature() {
        // composite Simpson on the untransformed integrand
        for r in [0.05, 1.0 / 3.0, 0.8] {
            let b = 1.0 / r;
            let n = 200_000;
            let h = b / n as f64;
            let f = |t: f64| 1.0 / ((1.0 + t * t) * (1.0 + r * r * t * t)).sqrt();
            let mut acc = f(0.0) + f(b);
            for k in 1..n {
                acc += if k % 2 == 1 { 4.0 } else { 2.0 } * f(k as f64 * h);
            }
            let simpson = 0.5 * acc * h / 3.0;
            assert!((contour_height(r).unwrap() - simpson).abs() < 1e-10);
            // the midpoint t = 1/√r of the symmetry t ↦ 1/(r t) splits K(r′) in half
            let kp = ellip_k(elliptic::complementary(r)).unwrap();
            let half = quad::integrate(f, 0.0, 1.0 / r.sqrt(), 1e-14).unwrap();
            assert!((half - 0.5 * kp).abs() < 1e-10);
            assert!(contour_height(r).unwrap() < 0.5 * kp);
        }
    }

    #[test]
    fn contour_encloses_unoccupied_window() {
        let s = ContourSpec::from_gaps(0.5, 6.0, -1.0, 1e-7).unwrap();
        let (left, _) = s.map(-s.big_r).unwrap();
        let (right, _) = s.map(s.big_r).unwrap();
        assert!(left.im.abs() < 1e-12 && right.im.abs() < 1e-12);
        assert!(left.re > -1.0 && left.re < -0.5);
        assert!(right.re > 5.0);
        let (top, _) = s.map(0.0).unwrap();
        assert!(top.im > 0.0);
    }

    #[test]
    fn single_term_direct() {
        let v = Array2::from_elem((1, 1), 1.0);
        let t = coupled_coefficients_direct(&v.view(), &v.view(), &[0.0, 2.0]).unwrap();
        assert_eq!(t.t[[0, 0]], -0.5);
    }

    #[test]
    fn direct_matches_explicit_and_is_negative_definite() {
        let (pv, pc) = (random(12, 5, 1), random(12, 7, 2));
        let e = ladder(5, 7, 0.3, 1.5);
        let t = coupled_coefficients_direct(&pv.view(), &pc.view(), &e).unwrap().t;
        let oracle = explicit(&pv, &pc, &e);
        assert!(rel_diff(&t.view(), &oracle.view()) < 1e-13);
        assert!(crate::linalg::symmetry_defect(&t.view()) <= 1e-12 * frobenius(&t.view()));
        assert!(sym_eig(&t.view()).unwrap().max() < 0.0);
    }

    #[test]
    fn contour_matches_direct() {
        for (seed, gap, width) in [(3, 0.2, 2.0), (4, 1.0, 3.0), (5, 0.05, 4.95)] {
            let (pv, pc) = (random(20, 6, seed), random(20, 9, seed + 100));
            let e = ladder(6, 9, gap, width);
            let spec = elliptic_params(&e, 6, 9, 1e-7).unwrap();
            let direct = coupled_coefficients_direct(&pv.view(), &pc.view(), &e).unwrap();
            let c = coupled_coefficients_contour(&pv.view(), &pc.view(), &e, &spec).unwrap();
            let d = rel_diff(&c.t.view(), &direct.t.view());
            assert!(d <= 1e-7, "seed {seed}: {d:e} with {} nodes", c.nodes_used);
            assert!(c.nodes_used <= 1025);
            assert!(c.est_rel_error <= 1e-7);
        }
    }

    #[test]
    fn budget_exhaustion_returns_best() {
        let (pv, pc) = (random(8, 3, 7), random(8, 4, 8));
        let e = ladder(3, 4, 0.01, 1.0);
        let spec = elliptic_params(&e, 3, 4, 1e-12).unwrap().with_max_nodes(33);
        match coupled_coefficients_contour(&pv.view(), &pc.view(), &e, &spec) {
            Err(Error::QuadratureNotConverged { nodes, best, .. }) => {
                assert_eq!(nodes, 33);
                assert_eq!(best.t.dim(), (8, 8));
            }
            other => panic!("expected non-convergence, got {other:?}"),
        }
    }

    #[test]
    fn bypass_rejected_and_dispatched() {
        let v = random(4, 2, 9);
        let e = [-1.0, 0.0, 2.0, 2.0];
        let spec = elliptic_params(&e, 2, 2, 1e-7).unwrap();
        assert!(spec.bypass);
        assert!(matches!(
            coupled_coefficients_contour(&v.view(), &v.view(), &e, &spec),
            Err(Error::ContourBypassed)
        ));
        let t = coupled_coefficients(&v.view(), &v.view(), &e, &spec).unwrap();
        assert_eq!(t.nodes_used, 0);
    }

    #[test]
    fn error_bound_arithmetic() {
        let e2 = 2f64.exp();
        let s = ContourSpec::from_gaps(1.0, e2, 0.0, 1e-7).unwrap();
        let b10 = cauchy_error_bound(&s, 10);
        assert!((b10 - (-PI * PI).exp()).abs() < 1e-15);
        assert!((cauchy_error_bound(&s, 20) - b10 * b10).abs() < 1e-20);
        let wider = ContourSpec::from_gaps(1.0, 50.0, 0.0, 1e-7).unwrap();
        assert!(cauchy_error_bound(&wider, 10) > b10);
    }
}
