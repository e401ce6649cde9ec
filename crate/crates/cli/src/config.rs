//! JSON run configuration.
//!
//! Every key is optional; omitted keys take the defaults below. Unknown
//! keys are rejected.
//!
//! ```json
//! {
//!   "system": {
//!     "seed": 1, "dims": [8, 8, 8], "spacing": 1.25,
//!     "nv": 16, "nc": 16, "gap": 0.2, "bandwidth": 2.0,
//!     "wfn": null
//!   },
//!   "isdf": { "k_vc": 8.0, "k_vn": 8.0, "k_nn": 8.0, "selector": { "method": "qrcp_direct" } },
//!   "contour": { "delta_rel": 1e-7, "max_nodes": 4097 },
//!   "pipeline": "lowrank",
//!   "threads": 1,
//!   "output": { "dir": "lrgw-out" },
//!   "validation": {
//!     "extra_systems": [ ... ],
//!     "k_sweep": [4.0, 6.0, 8.0, 10.0, 12.0],
//!     "delta_sweep": [1e-2, 1e-3, 1e-4, 1e-5, 1e-6],
//!     "nodes_sweep": [3, 5, 9, 17, 33, 65, 129, 257]
//!   },
//!   "scale": { "sizes": [2, 4, 8, 16, 32], "points_per_band": 32, "repeats": 3 }
//! }
//! ```
//!
//! `system.wfn`, when set, names a `WFN1` file that replaces the synthetic
//! system (seed, dims, spacing, bands, gap and bandwidth are then ignored).
//! The selector may also be `{"method": "qrcp_sketched", "seed": 7}`.

use lrgw::contour::{DEFAULT_DELTA_REL, DEFAULT_MAX_NODES};
use lrgw::gw::PipelineTag;
use lrgw::isdf::{IsdfCoefficients, PointSelector};
use lrgw::model::{build_synthetic_system, load_system, ElectronicStructure, Grid};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

use crate::error::{CliError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub system: SystemConfig,
    pub isdf: IsdfConfig,
    pub contour: ContourConfig,
    pub pipeline: PipelineTag,
    pub threads: usize,
    pub output: OutputConfig,
    pub validation: ValidationConfig,
    pub scale: ScaleConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            system: SystemConfig::default(),
            isdf: IsdfConfig::default(),
            contour: ContourConfig::default(),
            pipeline: PipelineTag::Lowrank,
            threads: 1,
            output: OutputConfig::default(),
            validation: ValidationConfig::default(),
            scale: ScaleConfig::default(),
        }
    }
}

/// A seeded synthetic system (`N_r = dims[0]·dims[1]·dims[2]`, cubic
/// voxels of edge `spacing` bohr).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SystemSpec {
    pub seed: u64,
    pub dims: [usize; 3],
    pub spacing: f64,
    pub nv: usize,
    pub nc: usize,
    pub gap: f64,
    pub bandwidth: f64,
}

impl Default for SystemSpec {
    fn default() -> Self {
        Self {
            seed: 1,
            dims: [8, 8, 8],
            spacing: 1.25,
            nv: 16,
            nc: 16,
            gap: 0.2,
            bandwidth: 2.0,
        }
    }
}

impl SystemSpec {
    pub fn build(&self) -> Result<ElectronicStructure> {
        let grid = Grid::with_spacing(self.dims, self.spacing).map_err(CliError::stage("system"))?;
        build_synthetic_system(self.seed, &grid, self.nv, self.nc, self.gap, self.bandwidth)
            .map_err(CliError::stage("system"))
    }

    fn check(&self, what: &str) -> Result<()> {
        if self.dims.contains(&0) {
            return Err(CliError::Config(format!("{what}: dims must be positive")));
        }
        if !(self.spacing > 0.0 && self.spacing.is_finite()) {
            return Err(CliError::Config(format!("{what}: spacing must be positive")));
        }
        if self.nv == 0 || self.nc == 0 {
            return Err(CliError::Config(format!("{what}: nv and nc must be at least 1")));
        }
        if !self.gap.is_finite() || !self.bandwidth.is_finite() {
            return Err(CliError::Config(format!("{what}: gap and bandwidth must be finite")));
        }
        Ok(())
    }
}

/// The main system: a [`SystemSpec`] or a `WFN1` file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SystemConfig {
    pub seed: u64,
    pub dims: [usize; 3],
    pub spacing: f64,
    pub nv: usize,
    pub nc: usize,
    pub gap: f64,
    pub bandwidth: f64,
    pub wfn: Option<PathBuf>,
}

impl Default for SystemConfig {
    fn default() -> Self {
        let s = SystemSpec::default();
        Self {
            seed: s.seed,
            dims: s.dims,
            spacing: s.spacing,
            nv: s.nv,
            nc: s.nc,
            gap: s.gap,
            bandwidth: s.bandwidth,
            wfn: None,
        }
    }
}

impl SystemConfig {
    pub fn spec(&self) -> SystemSpec {
        SystemSpec {
            seed: self.seed,
            dims: self.dims,
            spacing: self.spacing,
            nv: self.nv,
            nc: self.nc,
            gap: self.gap,
            bandwidth: self.bandwidth,
        }
    }

    pub fn build(&self) -> Result<ElectronicStructure> {
        match &self.wfn {
            Some(path) => load_system(path).map_err(CliError::stage("system")),
            None => self.spec().build(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IsdfConfig {
    pub k_vc: f64,
    pub k_vn: f64,
    pub k_nn: f64,
    pub selector: PointSelector,
}

impl Default for IsdfConfig {
    fn default() -> Self {
        let k = IsdfCoefficients::default();
        Self {
            k_vc: k.k_vc,
            k_vn: k.k_vn,
            k_nn: k.k_nn,
            selector: PointSelector::QrcpDirect,
        }
    }
}

impl IsdfConfig {
    pub fn coefficients(&self) -> IsdfCoefficients {
        IsdfCoefficients {
            k_vc: self.k_vc,
            k_vn: self.k_vn,
            k_nn: self.k_nn,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ContourConfig {
    pub delta_rel: f64,
    pub max_nodes: usize,
}

impl Default for ContourConfig {
    fn default() -> Self {
        Self {
            delta_rel: DEFAULT_DELTA_REL,
            max_nodes: DEFAULT_MAX_NODES,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: PathBuf,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("lrgw-out"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ValidationConfig {
    /// Checked alongside the main system.
    pub extra_systems: Vec<SystemSpec>,
    pub k_sweep: Vec<f64>,
    pub delta_sweep: Vec<f64>,
    pub nodes_sweep: Vec<usize>,
}

impl Default for ValidationConfig {
    fn default() -> Self {
        let sys = |seed, dims, n, gap, bandwidth| SystemSpec {
            seed,
            dims,
            spacing: 1.25,
            nv: n,
            nc: n,
            gap,
            bandwidth,
        };
        Self {
            extra_systems: vec![
                sys(2, [8, 8, 8], 16, 0.2, 2.0),
                sys(3, [8, 8, 4], 8, 0.05, 1.5),
                sys(4, [6, 6, 6], 12, 0.02, 1.98),
                sys(5, [4, 4, 8], 4, 0.5, 1.0),
            ],
            k_sweep: vec![4.0, 6.0, 8.0, 10.0, 12.0],
            delta_sweep: vec![1e-2, 1e-3, 1e-4, 1e-5, 1e-6],
            nodes_sweep: vec![3, 5, 9, 17, 33, 65, 129, 257],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScaleConfig {
    /// `N_v = N_c` per size, ascending; `N_e = 2·N_v`.
    pub sizes: Vec<usize>,
    /// `N_r = points_per_band·N_v`; must come out a power of two.
    pub points_per_band: usize,
    pub repeats: usize,
}

impl Default for ScaleConfig {
    fn default() -> Self {
        Self {
            sizes: vec![2, 4, 8, 16, 32],
            points_per_band: 32,
            repeats: 3,
        }
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: RunConfig = serde_json::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<()> {
        match &self.system.wfn {
            Some(p) if !p.is_file() => {
                return Err(CliError::Config(format!("wavefunction file {} does not exist", p.display())))
            }
            Some(_) => {}
            None => self.system.spec().check("system")?,
        }
        for s in &self.validation.extra_systems {
            s.check("validation.extra_systems")?;
        }
        let k = [self.isdf.k_vc, self.isdf.k_vn, self.isdf.k_nn];
        if k.iter().chain(&self.validation.k_sweep).any(|&k| !(k > 0.0 && k.is_finite())) {
            return Err(CliError::Config("ISDF coefficients must be positive".into()));
        }
        let delta_ok = |d: f64| d > 0.0 && d < 0.5;
        if !delta_ok(self.contour.delta_rel) || !self.validation.delta_sweep.iter().all(|&d| delta_ok(d)) {
            return Err(CliError::Config("delta_rel must lie in (0, 0.5)".into()));
        }
        if self.contour.max_nodes < 17 {
            return Err(CliError::Config("contour.max_nodes must be at least 17".into()));
        }
        if self.validation.nodes_sweep.iter().any(|&n| n < 2) {
            return Err(CliError::Config("nodes_sweep entries must be at least 2".into()));
        }
        if self.threads == 0 {
            return Err(CliError::Config("threads must be at least 1".into()));
        }
        self.scale.check()
    }
}

impl ScaleConfig {
    pub fn check(&self) -> Result<()> {
        if self.sizes.is_empty() {
            return Err(CliError::Config("scale.sizes must not be empty".into()));
        }
        if self.sizes.windows(2).any(|w| w[1] <= w[0]) {
            return Err(CliError::Config("scale.sizes must be strictly ascending".into()));
        }
        if self.repeats == 0 {
            return Err(CliError::Config("scale.repeats must be at least 1".into()));
        }
        for &n in &self.sizes {
            let n_r = n * self.points_per_band;
            if n == 0 || !n_r.is_power_of_two() || n_r < 8 {
                return Err(CliError::Config(format!(
                    "scale size {n}: N_r = {n_r} must be a power of two of at least 8"
                )));
            }
            if 2 * n > n_r {
                return Err(CliError::Config(format!("scale size {n}: more bands than grid points")));
            }
        }
        Ok(())
    }
}

/// Power-of-two grid dimensions with `n_r` points, as cubic as possible.
pub fn power_of_two_dims(n_r: usize) -> [usize; 3] {
    let e = n_r.trailing_zeros() as usize;
    let mut dims = [1usize; 3];
    for k in 0..e {
        dims[k % 3] *= 2;
    }
    dims
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_object_gives_defaults() {
        let cfg = RunConfig::from_json("{}").unwrap();
        assert_eq!(cfg, RunConfig::default());
        assert_eq!(cfg.isdf.k_vc, 8.0);
        assert_eq!(cfg.contour.delta_rel, 1e-7);
        assert_eq!(cfg.pipeline, PipelineTag::Lowrank);
        assert_eq!(cfg.system.nv + cfg.system.nc, 32);
    }

    #[test]
    fn round_trips_through_json() {
        let cfg = RunConfig::default();
        let text = serde_json::to_string(&cfg).unwrap();
        assert_eq!(RunConfig::from_json(&text).unwrap(), cfg);
    }

    #[test]
    fn partial_blocks_and_selector() {
        let cfg = RunConfig::from_json(
            r#"{"system": {"nv": 4}, "isdf": {"k_nn": 6.0, "selector": {"method": "qrcp_sketched", "seed": 9}},
                "pipeline": "bruteforce"}"#,
        )
        .unwrap();
        assert_eq!(cfg.system.nv, 4);
        assert_eq!(cfg.system.nc, 16);
        assert_eq!(cfg.isdf.k_nn, 6.0);
        assert_eq!(cfg.isdf.k_vc, 8.0);
        assert_eq!(cfg.isdf.selector, PointSelector::QrcpSketched { seed: 9 });
        assert_eq!(cfg.pipeline, PipelineTag::Bruteforce);
    }

    #[test]
    fn rejects_bad_values() {
        for bad in [
            r#"{"isdf": {"k_vc": 0.0}}"#,
            r#"{"contour": {"delta_rel": 0.5}}"#,
            r#"{"contour": {"delta_rel": 0.0}}"#,
            r#"{"threads": 0}"#,
            r#"{"system": {"wfn": "/no/such/file.wfn"}}"#,
            r#"{"scale": {"sizes": []}}"#,
            r#"{"scale": {"sizes": [4, 2]}}"#,
            r#"{"scale": {"sizes": [3]}}"#,
            r#"{"unknown": 1}"#,
            r#"{"system": {"colour": "red"}}"#,
            r#"not json"#,
        ] {
            let err = RunConfig::from_json(bad).unwrap_err();
            assert!(matches!(err, CliError::Config(_)), "{bad}: {err}");
        }
    }

    #[test]
    fn dims_are_balanced() {
        assert_eq!(power_of_two_dims(64), [4, 4, 4]);
        assert_eq!(power_of_two_dims(128), [8, 4, 4]);
        assert_eq!(power_of_two_dims(1024).iter().product::<usize>(), 1024);
    }
}
