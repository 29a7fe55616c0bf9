//! Experiment configuration, loaded from TOML.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::assembly::PhysicsParams;
use crate::error::{io_err, Error, Result};
use crate::geometry::{build_background_mesh, BackgroundMesh, BoxDomain};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GeometryConfig {
    /// Background box `[lo, hi]²`.
    pub box_interval: [f64; 2],
    pub h_target: f64,
}

impl Default for GeometryConfig {
    fn default() -> Self {
        Self { box_interval: [-1.2, 1.2], h_target: 0.125 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SamplingConfig {
    pub n_train: usize,
    pub n_test: usize,
    pub seed: u64,
    /// Parameter box `[lo, hi]` for both `r` and `θ`.
    pub param_interval: [f64; 2],
}

impl Default for SamplingConfig {
    fn default() -> Self {
        Self { n_train: 400, n_test: 30, seed: 0, param_interval: [1.0, 1.2] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ToleranceConfig {
    pub eps_pod: f64,
    pub eps_deim_a: f64,
    pub eps_deim_f: f64,
    pub eps_safe: f64,
    pub c_inv: f64,
    /// Upper bound on the DEIM basis sizes; `0` means `n_train`.
    pub l_cap: usize,
}

impl Default for ToleranceConfig {
    fn default() -> Self {
        Self { eps_pod: 1e-6, eps_deim_a: 1e-14, eps_deim_f: 1e-14, eps_safe: 1e-14, c_inv: 1.0, l_cap: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepConfig {
    pub n_list: Vec<usize>,
    /// Fit window for the true error and the residual estimators.
    pub fit_n_min: usize,
    /// Fit window for the tail energy.
    pub fit_n_min_tail: usize,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self { n_list: vec![2, 4, 6, 8, 10, 15, 20, 25, 30, 40], fit_n_min: 5, fit_n_min_tail: 2 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PathConfig {
    pub artifacts: PathBuf,
    pub reports: PathBuf,
}

impl Default for PathConfig {
    fn default() -> Self {
        Self { artifacts: "artifacts".into(), reports: "reports".into() }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Config {
    pub geometry: GeometryConfig,
    pub physics: PhysicsParams,
    pub sampling: SamplingConfig,
    pub tolerances: ToleranceConfig,
    pub sweep: SweepConfig,
    pub paths: PathConfig,
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::Config(format!("{name} must be positive, got {v}")))
    }
}

impl Config {
    pub fn from_toml(text: &str) -> Result<Self> {
        let config: Config = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        let [lo, hi] = self.geometry.box_interval;
        if !(hi > lo) {
            return Err(Error::Config(format!("empty box interval [{lo}, {hi}]")));
        }
        positive("h_target", self.geometry.h_target)?;
        self.physics.validate().map_err(|e| Error::Config(e.to_string()))?;
        let t = &self.tolerances;
        for (name, v) in [
            ("eps_pod", t.eps_pod),
            ("eps_deim_a", t.eps_deim_a),
            ("eps_deim_f", t.eps_deim_f),
            ("eps_safe", t.eps_safe),
            ("c_inv", t.c_inv),
        ] {
            positive(name, v)?;
        }
        let s = &self.sampling;
        if s.n_train == 0 || s.n_test == 0 {
            return Err(Error::Config("n_train and n_test must be at least 1".into()));
        }
        let [plo, phi] = s.param_interval;
        if !(plo > 0.0 && phi >= plo) {
            return Err(Error::Config(format!("invalid parameter interval [{plo}, {phi}]")));
        }
        let n = &self.sweep.n_list;
        if n.is_empty() || n[0] == 0 || n.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Config("n_list must be non-empty, positive and strictly increasing".into()));
        }
        Ok(())
    }

    pub fn l_cap(&self) -> usize {
        if self.tolerances.l_cap == 0 {
            self.sampling.n_train
        } else {
            self.tolerances.l_cap
        }
    }

    pub fn mesh(&self) -> Result<BackgroundMesh> {
        let [lo, hi] = self.geometry.box_interval;
        build_background_mesh(BoxDomain::square(lo, hi), self.geometry.h_target)
    }

    /// SHA-256 of everything that influences the offline artifacts
    /// (all sections except the output paths).
    pub fn hash(&self) -> String {
        let mut canonical = self.clone();
        canonical.paths = PathConfig::default();
        let text = toml::to_string(&canonical).expect("config serialises");
        let digest = Sha256::digest(text.as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}

pub fn load_config(path: &Path) -> Result<Config> {
    let text = std::fs::read_to_string(path).map_err(io_err(format!("reading {}", path.display())))?;
    Config::from_toml(&text)
}
