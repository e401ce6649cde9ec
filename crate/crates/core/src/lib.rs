//! Low-rank inversion of the static dielectric matrix and static COHSEX
//! self-energies on a periodic real-space grid.
//!
//! The pipeline runs bottom-up through the modules:
//!
//! * [`model`]: grid, synthetic electronic structure, Coulomb operator, WFN1 files;
//! * [`isdf`]: interpolative separable density fitting of orbital-pair matrices;
//! * [`contour`]: the coupled coefficient matrix `T = C·Ω⁻¹·Cᵀ` by elliptic
//!   contour quadrature, with a direct-sum reference;
//! * [`smw`]: `ε⁻¹ = I + V·P·K·Pᵀ` via Sherman–Morrison–Woodbury, with dense oracles;
//! * [`gw`]: self-energies from the low-rank, ISDF-conventional and brute-force pipelines.
//!
//! [`linalg`] holds the dense kernels everything else builds on.

pub mod contour;
pub mod error;
pub mod gw;
pub mod isdf;
pub mod linalg;
pub mod model;
pub mod smw;

pub use error::{Error, Result};
