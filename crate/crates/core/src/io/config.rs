//! TOML run configuration. Unknown keys are rejected at every level.
//!
//! ```toml
//! grid_size = 255
//! out_dir = "out"
//!
//! [model]
//! sigma = 3.0
//! tau = 1.6
//!
//! [numerics]
//! dt = 0.01
//! seed = 42
//!
//! [sweep]
//! tau_values = [1.6, 1.3, 1.1, 0.9, 0.5, 0.2]
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::{ModelParams, NumericsConfig};

pub const DEFAULT_GRID_SIZE: usize = 255;

/// Evenly spaced values `min, ..., max`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Range {
    pub min: f64,
    pub max: f64,
    pub count: usize,
}

impl Range {
    pub fn values(&self) -> Vec<f64> {
        match self.count {
            0 => Vec::new(),
            1 => vec![self.min],
            n => (0..n)
                .map(|i| self.min + (self.max - self.min) * i as f64 / (n - 1) as f64)
                .collect(),
        }
    }

    fn validate(&self, name: &str) -> Result<()> {
        if !(self.min.is_finite() && self.max.is_finite() && self.min <= self.max) {
            return Err(Error::Config(format!("{name}: need finite min <= max")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepBlock {
    /// Fixed sigma of `sweep-tau`; the model value when unset.
    pub sigma: Option<f64>,
    pub tau_values: Vec<f64>,
    /// Fixed tau of `sweep-sigma`; the model value when unset.
    pub tau: Option<f64>,
    pub sigma_values: Vec<f64>,
    pub threshold_ratio: f64,
}

impl Default for SweepBlock {
    fn default() -> Self {
        Self {
            sigma: None,
            tau_values: vec![1.6, 1.3, 1.1, 0.9, 0.5, 0.2],
            tau: None,
            sigma_values: vec![2.7, 2.5, 2.4, 2.2, 2.0, 1.7],
            threshold_ratio: 2.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StabilityBlock {
    pub k_max: i64,
    /// Also list `-k` rows.
    pub both_signs: bool,
}

impl Default for StabilityBlock {
    fn default() -> Self {
        Self { k_max: 20, both_signs: false }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CurveBlock {
    pub modes: Vec<i64>,
    pub sigma: Range,
}

impl Default for CurveBlock {
    fn default() -> Self {
        Self { modes: (1..=6).collect(), sigma: Range { min: 1.7, max: 4.0, count: 47 } }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HeatmapBlock {
    pub modes: Vec<i64>,
    pub tau: Range,
    pub sigma: Range,
}

impl Default for HeatmapBlock {
    fn default() -> Self {
        Self {
            modes: vec![1, 2, 3, 4, 5, 6],
            tau: Range { min: 0.05, max: 3.0, count: 60 },
            sigma: Range { min: 1.7, max: 4.0, count: 47 },
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DiagnosticsBlock {
    /// Ball radius; `Lambda / 2` when unset.
    pub b: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub grid_size: usize,
    pub out_dir: Option<PathBuf>,
    /// Worker threads of the sweeps.
    pub workers: usize,
    pub model: ModelParams,
    pub numerics: NumericsConfig,
    pub sweep: SweepBlock,
    pub stability: StabilityBlock,
    pub critical_curve: CurveBlock,
    pub heatmap: HeatmapBlock,
    pub diagnostics: DiagnosticsBlock,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            grid_size: DEFAULT_GRID_SIZE,
            out_dir: None,
            workers: 1,
            model: ModelParams::default(),
            numerics: NumericsConfig::default(),
            sweep: SweepBlock::default(),
            stability: StabilityBlock::default(),
            critical_curve: CurveBlock::default(),
            heatmap: HeatmapBlock::default(),
            diagnostics: DiagnosticsBlock::default(),
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        self.numerics.validate()?;
        if self.grid_size < 3 {
            return Err(Error::param("grid_size", format!("must be >= 3, got {}", self.grid_size)));
        }
        if self.workers < 1 {
            return Err(Error::param("workers", "must be >= 1"));
        }
        if self.stability.k_max < 1 {
            return Err(Error::param("stability.k_max", "must be >= 1"));
        }
        if !(self.sweep.threshold_ratio > 0.0) {
            return Err(Error::param("sweep.threshold_ratio", "must be > 0"));
        }
        self.critical_curve.sigma.validate("critical_curve.sigma")?;
        self.heatmap.tau.validate("heatmap.tau")?;
        self.heatmap.sigma.validate("heatmap.sigma")?;
        if let Some(b) = self.diagnostics.b {
            if !(b > 0.0 && b < self.model.lambda_total) {
                return Err(Error::param("diagnostics.b", format!("must satisfy 0 < b < Lambda, got {b}")));
            }
        }
        Ok(())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }
}

/// Parses and validates a config document; defaults fill missing keys.
pub fn parse_config_str(text: &str) -> Result<RunConfig> {
    let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn parse_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path)?;
    parse_config_str(&text).map_err(|e| match e {
        Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
        other => other,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_is_defaults() {
        let cfg = parse_config_str("").unwrap();
        assert_eq!(cfg, RunConfig::default());
        assert_eq!(cfg.grid_size, 255);
        assert_eq!(cfg.numerics.dt, 0.01);
        assert_eq!(cfg.numerics.stat_tol, 1e-10);
        assert_eq!(cfg.model.mu, 0.6);
    }

    #[test]
    fn sections_parse() {
        let cfg = parse_config_str("grid_size = 64\n[model]\nsigma = 2.5\nLambda = 2.0\n[numerics]\nseed = 7\n").unwrap();
        assert_eq!(cfg.grid_size, 64);
        assert_eq!(cfg.model.sigma, 2.5);
        assert_eq!(cfg.model.lambda_total, 2.0);
        assert_eq!(cfg.numerics.seed, 7);
    }

    #[test]
    fn rejections() {
        let err = parse_config_str("[model]\nsigma = 0.5\n").unwrap_err();
        assert!(matches!(err, Error::InvalidParameter { name: "sigma", .. }), "{err}");
        let err = parse_config_str("[model]\nsgima = 3.0\n").unwrap_err().to_string();
        assert!(err.contains("sgima"), "{err}");
        let err = parse_config_str("nonsense = 1\n").unwrap_err().to_string();
        assert!(err.contains("nonsense"), "{err}");
        let err = parse_config_str("[model]\nmu = 0.6\nmu = 0.7\n").unwrap_err().to_string();
        assert!(err.contains("line 3") || err.contains('3'), "{err}");
    }

    #[test]
    fn toml_round_trip() {
        let mut cfg = RunConfig::default();
        cfg.out_dir = Some("x".into());
        cfg.sweep.sigma = Some(3.0);
        assert_eq!(parse_config_str(&cfg.to_toml()).unwrap(), cfg);
    }

    #[test]
    fn range_values() {
        assert_eq!(Range { min: 1.0, max: 2.0, count: 3 }.values(), vec![1.0, 1.5, 2.0]);
        assert!(Range { min: 1.0, max: 2.0, count: 0 }.values().is_empty());
    }
}
