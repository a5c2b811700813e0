//! Run configuration: one JSON document, overridden field by field by
//! command-line flags. Precedence is flag > file > built-in default.

use std::f64::consts::{FRAC_PI_2, PI};
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, ensure, Context, Result};
use pcmod::{CouplerParams, Protocol};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SegmentSpec {
    pub phase: f64,
    pub duration: f64,
}

/// Schedule used by `simulate` when no explicit protocol is given.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Solver {
    PushPull,
    TwoStep,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IsolatorConfig {
    /// Stage protocol; defaults to the first half of the push-pull pair.
    pub stage: Option<Vec<SegmentSpec>>,
    /// Defaults to the value that blocks forward cross transmission.
    pub theta1: Option<f64>,
    pub theta2: f64,
    /// Modulation phase offset of the last stage.
    pub offset: f64,
    pub sweep: bool,
    pub trajectories: bool,
}

impl Default for IsolatorConfig {
    fn default() -> Self {
        Self {
            stage: None,
            theta1: None,
            theta2: 0.0,
            offset: FRAC_PI_2,
            sweep: true,
            trajectories: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    /// Closed form versus RK4, per matrix entry.
    pub oracle: f64,
    pub unitarity: f64,
    /// Bloch versus amplitude representation.
    pub bloch: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            oracle: 1e-8,
            unitarity: 1e-12,
            bloch: 1e-10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub delta: f64,
    pub kappa: f64,
    /// Relative phase of the second segment for two-step commands.
    pub phi: f64,
    pub protocol: Option<Vec<SegmentSpec>>,
    pub solver: Option<Solver>,
    /// Rows written to trajectory files.
    pub samples: usize,
    pub grid: usize,
    pub threshold: f64,
    pub seed: u64,
    pub restarts: usize,
    /// Largest segment count tried by `plan`.
    pub cap: Option<usize>,
    pub out: PathBuf,
    pub isolator: IsolatorConfig,
    pub tolerances: Tolerances,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            delta: 0.5,
            kappa: 1.0,
            phi: PI,
            protocol: None,
            solver: None,
            samples: 501,
            grid: 64,
            threshold: 0.99,
            seed: 0,
            restarts: 8,
            cap: None,
            out: PathBuf::from("out"),
            isolator: IsolatorConfig::default(),
            tolerances: Tolerances::default(),
        }
    }
}

/// Values given on the command line; `None` leaves the file value in place.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub grid: Option<usize>,
    pub delta: Option<f64>,
    pub kappa: Option<f64>,
    pub phi: Option<f64>,
    pub threshold: Option<f64>,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).context("invalid configuration")
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .with_context(|| format!("cannot read config {}", path.display()))?;
        Self::from_json(&text).with_context(|| format!("in {}", path.display()))
    }

    /// Defaults, then the optional file, then the flags; validated.
    pub fn resolve(path: Option<&Path>, overrides: &Overrides) -> Result<Self> {
        let mut cfg = match path {
            Some(p) => Self::load(p)?,
            None => Self::default(),
        };
        cfg.apply(overrides);
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(v) = &o.out {
            self.out = v.clone();
        }
        if let Some(v) = o.seed {
            self.seed = v;
        }
        if let Some(v) = o.grid {
            self.grid = v;
        }
        if let Some(v) = o.delta {
            self.delta = v;
        }
        if let Some(v) = o.kappa {
            self.kappa = v;
        }
        if let Some(v) = o.phi {
            self.phi = v;
        }
        if let Some(v) = o.threshold {
            self.threshold = v;
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.params()?;
        ensure!(self.phi.is_finite(), "phi must be finite");
        ensure!(self.samples >= 2, "samples must be >= 2, got {}", self.samples);
        ensure!(self.grid >= 16, "grid must be >= 16, got {}", self.grid);
        ensure!(
            self.threshold > 0.0 && self.threshold <= 1.0,
            "threshold must lie in (0, 1], got {}",
            self.threshold
        );
        ensure!(self.restarts >= 8, "restarts must be >= 8, got {}", self.restarts);
        if let Some(cap) = self.cap {
            ensure!(cap >= 2, "cap must be >= 2, got {cap}");
        }
        if let Some(p) = &self.protocol {
            to_protocol(p).context("protocol")?;
        }
        if let Some(s) = &self.isolator.stage {
            to_protocol(s).context("isolator.stage")?;
        }
        let iso = &self.isolator;
        ensure!(
            [iso.theta1.unwrap_or(0.0), iso.theta2, iso.offset].iter().all(|x| x.is_finite()),
            "isolator phases must be finite"
        );
        let t = &self.tolerances;
        ensure!(
            [t.oracle, t.unitarity, t.bloch].iter().all(|x| x.is_finite() && *x > 0.0),
            "tolerances must be positive"
        );
        if self.out.as_os_str().is_empty() {
            bail!("output directory must not be empty");
        }
        Ok(())
    }

    pub fn params(&self) -> Result<CouplerParams> {
        Ok(CouplerParams::new(self.delta, self.kappa)?)
    }
}

pub fn to_protocol(segments: &[SegmentSpec]) -> Result<Protocol> {
    let pairs: Vec<(f64, f64)> = segments.iter().map(|s| (s.phase, s.duration)).collect();
    Ok(Protocol::from_pairs(&pairs)?)
}

pub fn from_protocol(protocol: &Protocol) -> Vec<SegmentSpec> {
    protocol
        .segments()
        .iter()
        .map(|s| SegmentSpec {
            phase: s.phase(),
            duration: s.duration(),
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(RunConfig::from_json(r#"{"delta": 1.0, "detuning": 2.0}"#).is_err());
        assert!(RunConfig::from_json(r#"{"isolator": {"theta": 1.0}}"#).is_err());
        assert!(RunConfig::from_json(r#"{"protocol": [{"phase": 0, "duration": 1, "x": 0}]}"#).is_err());
    }

    #[test]
    fn flags_override_file() {
        let mut cfg = RunConfig::from_json(r#"{"delta": 2.0, "grid": 32, "seed": 4}"#).unwrap();
        cfg.apply(&Overrides {
            delta: Some(0.25),
            ..Overrides::default()
        });
        assert_eq!(cfg.delta, 0.25);
        assert_eq!(cfg.grid, 32);
        assert_eq!(cfg.seed, 4);
        assert_eq!(cfg.kappa, 1.0);
    }

    #[test]
    fn validation() {
        let bad = [
            r#"{"kappa": -1.0}"#,
            r#"{"delta": 0.0, "kappa": 0.0}"#,
            r#"{"grid": 4}"#,
            r#"{"samples": 1}"#,
            r#"{"threshold": 1.5}"#,
            r#"{"restarts": 2}"#,
            r#"{"protocol": []}"#,
            r#"{"protocol": [{"phase": 0.0, "duration": -1.0}]}"#,
        ];
        for text in bad {
            let cfg = RunConfig::from_json(text).unwrap();
            assert!(cfg.validate().is_err(), "{text}");
        }
        RunConfig::default().validate().unwrap();
    }
}
