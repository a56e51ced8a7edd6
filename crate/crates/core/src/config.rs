//! Run configuration: a single versioned JSON document.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fem::SolverOptions;
use crate::material::MaterialParams;
use crate::mesh::DomainSpec;
use crate::mma::MmaSettings;
use crate::sensitivity::ThicknessMap;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    Optimize,
    Analyze,
    FlatSheet,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DesignSettings {
    #[serde(default = "defaults::t_min")]
    pub t_min: f64,
    #[serde(default = "defaults::t_max")]
    pub t_max: f64,
    #[serde(default = "defaults::penalty")]
    pub penalty: f64,
    /// Filter radius (mm); `2 * min(hx, hy)` when absent.
    #[serde(default)]
    pub r_min: Option<f64>,
    /// Upper bound on `V / V_max`.
    #[serde(default = "defaults::volume_fraction")]
    pub volume_fraction: f64,
    /// Uniform initial design variable.
    #[serde(default = "defaults::initial")]
    pub initial: f64,
    /// Amplitude of a seeded uniform perturbation of the initial design.
    #[serde(default)]
    pub initial_perturbation: f64,
}

impl Default for DesignSettings {
    fn default() -> Self {
        Self {
            t_min: defaults::t_min(),
            t_max: defaults::t_max(),
            penalty: defaults::penalty(),
            r_min: None,
            volume_fraction: defaults::volume_fraction(),
            initial: defaults::initial(),
            initial_perturbation: 0.0,
        }
    }
}

impl DesignSettings {
    pub fn thickness_map(&self) -> ThicknessMap {
        ThicknessMap {
            t_min: self.t_min,
            t_max: self.t_max,
            penalty: self.penalty,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizerSettings {
    #[serde(default = "defaults::iterations")]
    pub iterations: usize,
    #[serde(flatten)]
    pub mma: MmaSettings,
}

impl Default for OptimizerSettings {
    fn default() -> Self {
        Self {
            iterations: defaults::iterations(),
            mma: MmaSettings::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema_version: u32,
    #[serde(default)]
    pub name: String,
    #[serde(default)]
    pub description: String,
    pub domain: DomainSpec,
    #[serde(default)]
    pub material: MaterialParams,
    #[serde(default)]
    pub design: DesignSettings,
    #[serde(default)]
    pub optimizer: OptimizerSettings,
    #[serde(default)]
    pub solver: SolverOptions,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub mode: Option<Mode>,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
}

mod defaults {
    pub fn t_min() -> f64 {
        0.5
    }
    pub fn t_max() -> f64 {
        2.0
    }
    pub fn penalty() -> f64 {
        1.0
    }
    pub fn volume_fraction() -> f64 {
        0.6
    }
    pub fn initial() -> f64 {
        0.4
    }
    pub fn iterations() -> usize {
        50
    }
}

impl RunConfig {
    pub fn from_json(text: &str, origin: &Path) -> Result<Self> {
        let config: RunConfig = serde_json::from_str(text).map_err(|e| Error::Parse {
            path: origin.to_path_buf(),
            detail: e.to_string(),
        })?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text, path)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// Filter radius, defaulting to twice the smaller element edge.
    pub fn r_min(&self) -> f64 {
        self.design.r_min.unwrap_or_else(|| {
            let (hx, hy) = self.domain.element_size();
            2.0 * hx.min(hy)
        })
    }

    pub fn targets(&self) -> Vec<f64> {
        self.domain.pores.iter().map(|p| p.target_hd).collect()
    }

    pub fn weights(&self) -> Vec<f64> {
        self.domain.pores.iter().map(|p| p.weight).collect()
    }

    /// Replaces the element counts, keeping everything else.
    pub fn with_resolution(mut self, nelx: usize, nely: usize) -> Self {
        self.domain.nelx = nelx;
        self.domain.nely = nely;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::Config(format!(
                "unsupported schema_version {} (expected {SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        self.domain.validate()?;
        self.material.validate()?;
        self.solver.validate()?;
        self.optimizer.mma.validate()?;
        self.design.thickness_map().validate()?;
        let d = &self.design;
        if self.optimizer.iterations == 0 {
            return Err(Error::Config("optimizer.iterations must be at least 1".into()));
        }
        if !(d.volume_fraction > 0.0 && d.volume_fraction <= 1.0) {
            return Err(Error::Config("design.volume_fraction must lie in (0, 1]".into()));
        }
        if !(0.0..=1.0).contains(&d.initial) {
            return Err(Error::Config("design.initial must lie in [0, 1]".into()));
        }
        if !(d.initial_perturbation >= 0.0 && d.initial_perturbation <= 1.0) {
            return Err(Error::Config("design.initial_perturbation must lie in [0, 1]".into()));
        }
        if let Some(r) = d.r_min {
            if !(r > 0.0 && r.is_finite()) {
                return Err(Error::Config("design.r_min must be positive".into()));
            }
        }
        for (i, p) in self.domain.pores.iter().enumerate() {
            if !(p.target_hd >= 0.0 && p.target_hd.is_finite()) {
                return Err(Error::Config(format!("pore {i}: target_hd must be non-negative")));
            }
            if !(p.weight >= 0.0 && p.weight.is_finite()) {
                return Err(Error::Config(format!("pore {i}: weight must be non-negative")));
            }
        }
        Ok(())
    }
}

/// Built-in design cases.
pub mod presets {
    use super::*;

    pub const NAMES: [&str; 5] = ["cfcs1", "cfcs2", "cfcs3", "cfcs4", "cfcs4w"];

    pub fn source(name: &str) -> Option<&'static str> {
        Some(match name {
            "cfcs1" => include_str!("../presets/cfcs1.json"),
            "cfcs2" => include_str!("../presets/cfcs2.json"),
            "cfcs3" => include_str!("../presets/cfcs3.json"),
            "cfcs4" => include_str!("../presets/cfcs4.json"),
            "cfcs4w" => include_str!("../presets/cfcs4w.json"),
            _ => return None,
        })
    }

    pub fn load(name: &str) -> Result<RunConfig> {
        let text = source(name).ok_or_else(|| {
            Error::Config(format!("unknown preset '{name}' (available: {})", NAMES.join(", ")))
        })?;
        RunConfig::from_json(text, Path::new(name))
    }
}
