//! Complete elliptic integral of the first kind and the Jacobi elliptic
//! functions `sn`, `cn`, `dn` for real and complex arguments. The modulus
//! `r` is the elliptic modulus `k` (parameter `m = k²`).

use num_complex::Complex64;
use std::f64::consts::PI;

use crate::error::{Error, Result};

const AGM_MAX_STEPS: usize = 64;

/// Smallest tolerated addition-formula denominator.
pub const POLE_GUARD: f64 = 1e-13;

fn check_modulus(r: f64) -> Result<()> {
    if !(0.0..1.0).contains(&r) {
        return Err(Error::ModulusOutOfRange(r));
    }
    Ok(())
}

pub fn agm(mut a: f64, mut b: f64) -> f64 {
    for _ in 0..AGM_MAX_STEPS {
        if (a - b).abs() <= 4.0 * f64::EPSILON * a.abs() {
            break;
        }
        let next = 0.5 * (a + b);
        b = (a * b).sqrt();
        a = next;
    }
    0.5 * (a + b)
}

/// `K(r) = π / (2·AGM(1, √(1−r²)))`.
pub fn ellip_k(r: f64) -> Result<f64> {
    check_modulus(r)?;
    Ok(PI / (2.0 * agm(1.0, (1.0 - r * r).sqrt())))
}

/// Complementary modulus `√(1−r²)`.
pub fn complementary(r: f64) -> f64 {
    ((1.0 - r) * (1.0 + r)).sqrt()
}

/// `(sn, cn, dn)(u | r)` for real `u` by the descending Landen (AGM)
/// recursion.
pub fn jacobi_sn_cn_dn(u: f64, r: f64) -> Result<(f64, f64, f64)> {
    check_modulus(r)?;
    if r == 0.0 {
        return Ok((u.sin(), u.cos(), 1.0));
    }
    let mut a = vec![1.0];
    let mut c = vec![r];
    let mut b = complementary(r);
    while c.last().expect("nonempty").abs() > f64::EPSILON && a.len() < AGM_MAX_STEPS {
        let an = *a.last().expect("nonempty");
        a.push(0.5 * (an + b));
        c.push(0.5 * (an - b));
        b = (an * b).sqrt();
    }
    let n = a.len() - 1;
    let mut phi = (n as f64).exp2() * a[n] * u;
    for k in (1..=n).rev() {
        phi = 0.5 * (phi + (c[k] / a[k] * phi.sin()).asin());
    }
    let (s, co) = phi.sin_cos();
    let d = (1.0 - r * r * s * s).sqrt();
    Ok((s, co, d))
}

/// `(sn, cn, dn)(x + iy | r)` from the addition formulas: functions of `x`
/// with modulus `r` combined with functions of `y` with the complementary
/// modulus. Requires `|y| < K(√(1−r²))`.
pub fn jacobi_complex(u: Complex64, r: f64) -> Result<(Complex64, Complex64, Complex64)> {
    check_modulus(r)?;
    let (x, y) = (u.re, u.im);
    let rc = complementary(r);
    if rc >= 1.0 {
        // r = 0 leaves no finite rectangle; the circular functions extend directly
        return Ok((u.sin(), u.cos(), Complex64::new(1.0, 0.0)));
    }
    let kp = ellip_k(rc)?;
    if y.abs() >= kp {
        return Err(Error::ContourDegenerate(format!(
            "imaginary part {y} outside the fundamental strip |y| < {kp}"
        )));
    }
    let (s, c, d) = jacobi_sn_cn_dn(x, r)?;
    let (s1, c1, d1) = jacobi_sn_cn_dn(y, rc)?;
    let k2 = r * r;
    let den = c1 * c1 + k2 * s * s * s1 * s1;
    if den.abs() < POLE_GUARD {
        return Err(Error::ContourDegenerate(format!(
            "addition formula denominator {den:e} at {u}"
        )));
    }
    let sn = Complex64::new(s * d1, c * d * s1 * c1) / den;
    let cn = Complex64::new(c * c1, -s * d * s1 * d1) / den;
    let dn = Complex64::new(d * c1 * d1, -k2 * s * c * s1) / den;
    Ok((sn, cn, dn))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    // ∫₀^{π/2} dθ/√(1−r² sin²θ) by the trapezoid rule on the periodic integrand
    fn k_by_quadrature(r: f64) -> f64 {
        let n = 2000;
        let h = PI / n as f64;
        (0..n)
            .map(|j| {
                let t = (j as f64 + 0.5) * h;
                1.0 / (1.0 - r * r * t.sin().powi(2)).sqrt()
            })
            .sum::<f64>()
            * h
            / 2.0
    }

    #[test]
    fn complete_integral_two_ways() {
        for r in [0.0, 1.0 / 3.0, 0.5, 0.9, 0.99] {
            let a = ellip_k(r).unwrap();
            let b = k_by_quadrature(r);
            assert!((a - b).abs() < 1e-10, "r={r}: {a} vs {b}");
        }
        assert!((ellip_k(0.0).unwrap() - PI / 2.0).abs() < 1e-15);
        assert!(ellip_k(1.0).is_err());
        assert!(ellip_k(-0.1).is_err());
    }

    #[test]
    fn special_values() {
        let (s, c, d) = jacobi_sn_cn_dn(0.0, 0.7).unwrap();
        assert_eq!((s, c, d), (0.0, 1.0, 1.0));
        let (s, c, d) = jacobi_sn_cn_dn(0.9, 0.0).unwrap();
        assert_eq!((s, c, d), (0.9f64.sin(), 0.9f64.cos(), 1.0));
        let r = 1.0 / 3.0;
        let (s, _, d) = jacobi_sn_cn_dn(ellip_k(r).unwrap(), r).unwrap();
        assert!((s - 1.0).abs() < 1e-10);
        assert!((d - complementary(r)).abs() < 1e-8);
    }

    #[test]
    fn derivative_matches_cn_dn() {
        // d sn/du = cn·dn, checked by central differences
        let r = 0.6;
        for u in [-2.0, -0.3, 0.4, 1.7, 3.1] {
            let h = 1e-5;
            let (sp, _, _) = jacobi_sn_cn_dn(u + h, r).unwrap();
            let (sm, _, _) = jacobi_sn_cn_dn(u - h, r).unwrap();
            let (_, c, d) = jacobi_sn_cn_dn(u, r).unwrap();
            assert!(((sp - sm) / (2.0 * h) - c * d).abs() < 1e-8);
        }
    }

    #[test]
    fn complex_reduces_to_real_axis() {
        let r = 0.4;
        for x in [-1.3, 0.0, 0.2, 2.5] {
            let (s, c, d) = jacobi_complex(Complex64::new(x, 0.0), r).unwrap();
            let (sr, cr, dr) = jacobi_sn_cn_dn(x, r).unwrap();
            assert_eq!((s.re, c.re, d.re), (sr, cr, dr));
            assert_eq!((s.im.abs(), c.im.abs(), d.im.abs()), (0.0, 0.0, 0.0));
        }
    }

    #[test]
    fn purely_imaginary_argument() {
        let r = 0.55;
        let (s, c, d) = jacobi_complex(Complex64::new(0.0, 0.8), r).unwrap();
        assert_eq!(s.re, 0.0);
        assert!(s.im > 0.0);
        // Jacobi imaginary transformation: sn(iy|k) = i·sc(y|k′)
        let (s1, c1, d1) = jacobi_sn_cn_dn(0.8, complementary(r)).unwrap();
        assert!((s.im - s1 / c1).abs() < 1e-13);
        assert!((c.re - 1.0 / c1).abs() < 1e-13);
        assert!((d.re - d1 / c1).abs() < 1e-13);
    }

    #[test]
    fn identities_on_random_points() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..100 {
            let r: f64 = rng.random_range(0.0..0.95);
            let kp = ellip_k(complementary(r)).unwrap();
            let u = Complex64::new(rng.random_range(-4.0..4.0), rng.random_range(-0.9..0.9) * kp);
            let (s, c, d) = jacobi_complex(u, r).unwrap();
            assert!((s * s + c * c - 1.0).norm() < 1e-10);
            assert!((d * d + r * r * s * s - 1.0).norm() < 1e-10);
        }
    }

    #[test]
    fn complex_derivative() {
        let r = 0.5;
        let u = Complex64::new(0.7, 0.6);
        let h = 1e-5;
        let (sp, _, _) = jacobi_complex(u + h, r).unwrap();
        let (sm, _, _) = jacobi_complex(u - h, r).unwrap();
        let (_, c, d) = jacobi_complex(u, r).unwrap();
        assert!(((sp - sm) / (2.0 * h) - c * d).norm() < 1e-8);
    }

    #[test]
    fn strip_and_modulus_guards() {
        let r = 0.5;
        let kp = ellip_k(complementary(r)).unwrap();
        assert!(matches!(
            jacobi_complex(Complex64::new(0.1, kp), r),
            Err(Error::ContourDegenerate(_))
        ));
        assert!(matches!(jacobi_sn_cn_dn(0.1, 1.0), Err(Error::ModulusOutOfRange(_))));
    }
}
