//! Experiment configuration: JSON file, overridden by command-line flags.

use std::path::{Path, PathBuf};

use geoclose::bounds::{make_constants, BoundConstants, CurvatureBounds};
use geoclose::groups::SchottkyLayout;
use geoclose::tolerances::DEFAULT_T0;
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    Triangles,
    SurfaceTriangles,
    Partner,
    PartnerScaling,
    Pseudo,
    Closing,
    Cones,
    Crossings,
    Constants,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            Self::Triangles => "triangles",
            Self::SurfaceTriangles => "surface-triangles",
            Self::Partner => "partner",
            Self::PartnerScaling => "partner-scaling",
            Self::Pseudo => "pseudo",
            Self::Closing => "closing",
            Self::Cones => "cones",
            Self::Crossings => "crossings",
            Self::Constants => "constants",
        }
    }

    /// Sample count used when the configuration leaves it at zero.
    pub fn default_samples(self) -> usize {
        match self {
            Self::Triangles => 10_000,
            Self::SurfaceTriangles => 1_000,
            Self::Closing => 100,
            Self::Cones => 20,
            _ => 0,
        }
    }
}

/// `points` evenly spaced values in `[min, max]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearRange {
    pub min: f64,
    pub max: f64,
    pub points: usize,
}

impl LinearRange {
    pub fn single(value: f64) -> Self {
        Self {
            min: value,
            max: value,
            points: 1,
        }
    }

    pub fn values(&self) -> Vec<f64> {
        if self.points <= 1 {
            return vec![self.min];
        }
        let n = (self.points - 1) as f64;
        (0..self.points)
            .map(|k| self.min + (self.max - self.min) * k as f64 / n)
            .collect()
    }

    fn validate(&self, name: &str) -> Result<(), CliError> {
        if !(self.min.is_finite()
            && self.max.is_finite()
            && self.min <= self.max
            && self.points > 0)
        {
            return Err(CliError::Config(format!(
                "{name}: empty or invalid range {self:?}"
            )));
        }
        Ok(())
    }
}

/// `points` logarithmically spaced values in `[min, max]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogGrid {
    pub min: f64,
    pub max: f64,
    pub points: usize,
}

impl LogGrid {
    pub fn values(&self) -> Vec<f64> {
        if self.points <= 1 {
            return vec![self.min];
        }
        let (lo, hi) = (self.min.ln(), self.max.ln());
        let n = (self.points - 1) as f64;
        (0..self.points)
            .map(|k| (lo + (hi - lo) * k as f64 / n).exp())
            .collect()
    }

    fn validate(&self, name: &str) -> Result<(), CliError> {
        if !(self.min > 0.0 && self.max.is_finite() && self.min <= self.max && self.points > 0) {
            return Err(CliError::Config(format!(
                "{name}: empty or invalid log grid {self:?}"
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SchottkyConfig {
    pub layout: SchottkyLayout,
    /// Axis distance for disjoint layouts, crossing angle for crossing layouts.
    pub separation: f64,
    /// Translation length of both generators.
    pub strength: f64,
    /// Generator set stored as JSON; replaces the Schottky preset when present.
    pub generators: Option<PathBuf>,
}

impl Default for SchottkyConfig {
    fn default() -> Self {
        Self {
            layout: SchottkyLayout::Crossing,
            separation: std::f64::consts::FRAC_PI_3,
            strength: 3.0,
            generators: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    pub kappa1: f64,
    pub kappa2: f64,
    pub t0: f64,
    pub t1: LinearRange,
    pub t2: LinearRange,
    pub eps: LogGrid,
    /// Zero selects the per-kind default.
    pub samples: usize,
    /// Cone directions sampled per element.
    pub cone_samples: usize,
    pub seed: u64,
    /// `None` selects the per-kind default.
    pub tolerance: Option<f64>,
    pub inj_radius: f64,
    /// Overrides the configured `b` of the scaling experiment.
    pub b: Option<f64>,
    /// Use the mirrored crossing orientation.
    pub mirror: bool,
    /// Accept ε grids reaching beyond `ε₀`.
    pub allow_large_eps: bool,
    pub word_length: usize,
    pub cut: usize,
    pub schottky: SchottkyConfig,
    pub out: Option<PathBuf>,
    pub plot: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            kind: ExperimentKind::Partner,
            kappa1: 1.0,
            kappa2: 1.0,
            t0: DEFAULT_T0,
            t1: LinearRange::single(10.0),
            t2: LinearRange::single(10.0),
            eps: LogGrid {
                min: 1e-3,
                max: 0.05,
                points: 20,
            },
            samples: 0,
            cone_samples: 1_000,
            seed: 42,
            tolerance: None,
            inj_radius: 0.5,
            b: None,
            mirror: false,
            allow_large_eps: false,
            word_length: 8,
            cut: 5,
            schottky: SchottkyConfig::default(),
            out: None,
            plot: None,
        }
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn samples(&self) -> usize {
        if self.samples == 0 {
            self.kind.default_samples()
        } else {
            self.samples
        }
    }

    pub fn bounds(&self) -> Result<CurvatureBounds, CliError> {
        CurvatureBounds::new(self.kappa1, self.kappa2).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn constants(&self) -> Result<BoundConstants, CliError> {
        make_constants(self.bounds()?, self.t0, self.inj_radius)
            .map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let constants = self.constants()?;
        self.t1.validate("t1")?;
        self.t2.validate("t2")?;
        self.eps.validate("eps")?;
        if let Some(tol) = self.tolerance {
            if !(tol >= 0.0 && tol.is_finite()) {
                return Err(CliError::Config(format!(
                    "tolerance must be nonnegative, got {tol}"
                )));
            }
        }
        let uses_eps = matches!(
            self.kind,
            ExperimentKind::Partner | ExperimentKind::PartnerScaling | ExperimentKind::Pseudo
        );
        if uses_eps && !self.allow_large_eps && self.eps.max > constants.eps0 {
            return Err(CliError::Config(format!(
                "eps grid reaches {} beyond eps0 = {}; set allow_large_eps to override",
                self.eps.max, constants.eps0
            )));
        }
        if self.t1.min <= 0.0 || self.t2.min <= 0.0 {
            return Err(CliError::Config("loop lengths must be positive".into()));
        }
        if let Some(b) = self.b {
            if !(b > 0.0) {
                return Err(CliError::Config(format!("b must be positive, got {b}")));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grids() {
        let g = LogGrid {
            min: 1e-3,
            max: 1e-1,
            points: 3,
        }
        .values();
        assert!((g[1] - 1e-2).abs() < 1e-15 && (g[2] - 0.1).abs() < 1e-15);
        assert_eq!(
            LinearRange {
                min: 1.0,
                max: 2.0,
                points: 3
            }
            .values(),
            vec![1.0, 1.5, 2.0]
        );
        assert_eq!(LinearRange::single(4.0).values(), vec![4.0]);
    }

    #[test]
    fn eps_grid_is_limited_by_eps0() {
        let mut cfg = ExperimentConfig {
            eps: LogGrid {
                min: 1e-3,
                max: 0.2,
                points: 5,
            },
            ..Default::default()
        };
        assert!(cfg.validate().is_err());
        cfg.allow_large_eps = true;
        assert!(cfg.validate().is_ok());
        cfg.t1 = LinearRange {
            min: 3.0,
            max: 2.0,
            points: 2,
        };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn json_round_trip_and_unknown_fields() {
        let cfg = ExperimentConfig {
            kind: ExperimentKind::Closing,
            seed: 7,
            ..Default::default()
        };
        let back = ExperimentConfig::from_json(&serde_json::to_string(&cfg).unwrap()).unwrap();
        assert_eq!(cfg, back);
        assert!(ExperimentConfig::from_json(r#"{"kappa": 1}"#).is_err());
        let partial =
            ExperimentConfig::from_json(r#"{"kind": "partner-scaling", "seed": 3}"#).unwrap();
        assert_eq!(partial.kind, ExperimentKind::PartnerScaling);
        assert_eq!(partial.kappa1, 1.0);
    }
}
