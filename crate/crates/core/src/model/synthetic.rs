use ndarray::{Array1, Array2};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::{ElectronicStructure, Grid};
use crate::error::{Error, Result};
use crate::linalg::{qr_orthonormal, Dft3, Direction};

/// Width of the Gaussian low-pass envelope as a fraction of the smallest
/// Nyquist wavenumber of the grid.
const ENVELOPE_FRACTION: f64 = 0.2;

/// Maximum jitter of interior band energies, as a fraction of the level
/// spacing.
const ENERGY_JITTER: f64 = 0.3;

/// Seeded stand-in for a Kohn–Sham calculation.
///
/// Wavefunctions are band-limited random fields: complex Gaussian
/// coefficients under a Gaussian envelope in reciprocal space, transformed
/// to the grid, real part taken, then orthonormalised with the `dV`
/// weight. Occupied energies span `[−bandwidth, 0]`, unoccupied ones
/// `[gap, gap + bandwidth]`, both strictly increasing with the extreme
/// levels pinned, so `q = gap` and `Q = gap + bandwidth` exactly.
pub fn build_synthetic_system(
    seed: u64,
    grid: &Grid,
    nv: usize,
    nc: usize,
    gap: f64,
    bandwidth: f64,
) -> Result<ElectronicStructure> {
    if !(gap > 0.0) {
        return Err(Error::NonPositiveGap(gap));
    }
    if !(bandwidth >= gap) {
        return Err(Error::InvalidArgument(format!(
            "bandwidth {bandwidth} must be at least the gap {gap}"
        )));
    }
    if nv == 0 || nc == 0 {
        return Err(Error::InvalidArgument("need nv >= 1 and nc >= 1".into()));
    }
    let n_r = grid.n_r();
    let n = nv + nc;
    if n > n_r {
        return Err(Error::GridTooSmall { n_r, bands: n });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let g2 = grid.g_squared();
    let h_max = grid
        .dims()
        .iter()
        .zip(grid.cell())
        .map(|(&d, a)| a / d as f64)
        .fold(0.0, f64::max);
    let sigma = ENVELOPE_FRACTION * std::f64::consts::PI / h_max;
    let envelope = g2.mapv(|x| (-x / (2.0 * sigma * sigma)).exp());

    let plan = Dft3::new(grid.dims());
    let mut fields = Array2::zeros((n_r, n));
    let mut buf = vec![Complex64::new(0.0, 0.0); n_r];
    for k in 0..n {
        for (b, &w) in buf.iter_mut().zip(envelope.iter()) {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            *b = Complex64::new(re, im) * w;
        }
        plan.transform(&mut buf, Direction::Inverse)?;
        for (r, b) in buf.iter().enumerate() {
            fields[[r, k]] = b.re;
        }
    }
    let psi = qr_orthonormal(&fields.view()) / grid.dv().sqrt();

    let mut energies = Vec::with_capacity(n);
    energies.extend(spread(&mut rng, nv, -bandwidth, 0.0));
    energies.extend(spread(&mut rng, nc, gap, gap + bandwidth));

    ElectronicStructure::new(
        *grid,
        psi,
        Array1::from(energies),
        Array1::zeros(n),
        nv,
        nc,
    )
}

// `count` strictly increasing levels on [lo, hi]: evenly spaced, interior
// levels jittered, the top level (and the bottom one when count > 1) exact.
fn spread(rng: &mut ChaCha8Rng, count: usize, lo: f64, hi: f64) -> Vec<f64> {
    if count == 1 {
        // a lone occupied level sits at the top (0), a lone unoccupied one at the bottom
        return vec![if lo < 0.0 { hi } else { lo }];
    }
    let step = (hi - lo) / (count - 1) as f64;
    (0..count)
        .map(|k| {
            if k == 0 {
                lo
            } else if k == count - 1 {
                hi
            } else {
                lo + step * (k as f64 + rng.random_range(-ENERGY_JITTER..ENERGY_JITTER))
            }
        })
        .collect()
}
