//! Experiment configuration, read from a single JSON document.
//!
//! ```json
//! {
//!   "source": { "mu_a": 0.05, "mu_b": 0.05, "n_max": 4 },
//!   "detector": { "visibility": 0.964, "efficiency": 1.0,
//!                 "coincidence": "exact_one_one", "dark_count": 0.0 },
//!   "mode": "mc_coherent",
//!   "trials": 10000000,
//!   "repetitions": 10,
//!   "angles": { "quad": { "alpha": 0.0, "alpha_prime": 0.7853981633974483,
//!                         "beta": 0.39269908169872414, "beta_prime": 1.1780972450961724 } },
//!   "seed": 20240601,
//!   "output": { "path": "chsh.json", "format": "json" }
//! }
//! ```
//!
//! Every field except `source` has a default. A sweep uses
//! `"angles": { "sweep": { "start": 0.0, "stop": 3.14159, "points": 17 } }`
//! or `"angles": { "sweep": { "thetas": [ ... ] } }`.

use std::f64::consts::{FRAC_PI_4, FRAC_PI_8};
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measurement::{AnalyzerSetting, DetectorModel};
use crate::source::{Blocked, SourceSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    #[default]
    Exact,
    McFock,
    McCoherent,
}

impl Mode {
    pub fn is_monte_carlo(self) -> bool {
        self != Mode::Exact
    }
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exact" => Ok(Mode::Exact),
            "mc_fock" => Ok(Mode::McFock),
            "mc_coherent" => Ok(Mode::McCoherent),
            _ => Err(Error::Config(format!("unknown mode {s:?}"))),
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Exact => "exact",
            Mode::McFock => "mc_fock",
            Mode::McCoherent => "mc_coherent",
        })
    }
}

/// Analyzer angles `(α, α′, β, β′)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BellQuad {
    pub alpha: f64,
    pub alpha_prime: f64,
    pub beta: f64,
    pub beta_prime: f64,
}

impl BellQuad {
    /// `(0, π/4, π/8, 3π/8)`, where the singlet reaches `2√2`.
    pub const BELL_TEST: BellQuad = BellQuad {
        alpha: 0.0,
        alpha_prime: FRAC_PI_4,
        beta: FRAC_PI_8,
        beta_prime: 3.0 * FRAC_PI_8,
    };

    /// Settings in CHSH order: `(α,β)`, `(α,β′)`, `(α′,β)`, `(α′,β′)`.
    pub fn settings(&self) -> [AnalyzerSetting; 4] {
        [
            AnalyzerSetting::new(self.alpha, self.beta),
            AnalyzerSetting::new(self.alpha, self.beta_prime),
            AnalyzerSetting::new(self.alpha_prime, self.beta),
            AnalyzerSetting::new(self.alpha_prime, self.beta_prime),
        ]
    }
}

impl Default for BellQuad {
    fn default() -> Self {
        Self::BELL_TEST
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SweepGrid {
    Explicit { thetas: Vec<f64> },
    Range { start: f64, stop: f64, points: u32 },
}

impl SweepGrid {
    /// Evenly spaced grid including both end points.
    pub fn linspace(start: f64, stop: f64, points: u32) -> Self {
        SweepGrid::Range { start, stop, points }
    }

    pub fn thetas(&self) -> Vec<f64> {
        match self {
            SweepGrid::Explicit { thetas } => thetas.clone(),
            SweepGrid::Range { start, stop, points } => match *points {
                0 => Vec::new(),
                1 => vec![*start],
                n => (0..n)
                    .map(|k| start + (stop - start) * f64::from(k) / f64::from(n - 1))
                    .collect(),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Angles {
    Quad(BellQuad),
    Sweep(SweepGrid),
}

impl Default for Angles {
    fn default() -> Self {
        Angles::Quad(BellQuad::BELL_TEST)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputFormat {
    Json,
    Csv,
}

impl FromStr for OutputFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "json" => Ok(OutputFormat::Json),
            "csv" => Ok(OutputFormat::Csv),
            _ => Err(Error::Config(format!("unknown format {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
    /// Defaults per command: JSON for `chsh`, CSV for `sweep`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub format: Option<OutputFormat>,
}

pub const DEFAULT_TRIALS: u64 = 1_000_000;
pub const DEFAULT_REPETITIONS: u32 = 10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub source: SourceSpec,
    #[serde(default)]
    pub detector: DetectorModel,
    #[serde(default)]
    pub mode: Mode,
    #[serde(default = "default_trials")]
    pub trials: u64,
    #[serde(default = "default_repetitions")]
    pub repetitions: u32,
    #[serde(default)]
    pub angles: Angles,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default)]
    pub output: OutputSpec,
}

fn default_trials() -> u64 {
    DEFAULT_TRIALS
}

fn default_repetitions() -> u32 {
    DEFAULT_REPETITIONS
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            source: SourceSpec::default(),
            detector: DetectorModel::default(),
            mode: Mode::Exact,
            trials: DEFAULT_TRIALS,
            repetitions: DEFAULT_REPETITIONS,
            angles: Angles::default(),
            seed: None,
            output: OutputSpec::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let config: ExperimentConfig =
            serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        self.source.validate().map_err(|e| Error::Config(e.to_string()))?;
        self.detector.validate().map_err(|e| Error::Config(e.to_string()))?;
        if self.source.blocked != Blocked::None {
            return Err(Error::Config(
                "source.blocked must be \"none\"; the runner executes all three configurations".into(),
            ));
        }
        if self.repetitions == 0 {
            return Err(Error::Config("repetitions must be >= 1".into()));
        }
        if self.mode.is_monte_carlo() {
            if self.trials == 0 {
                return Err(Error::Config("trials must be >= 1 in Monte Carlo modes".into()));
            }
            if self.seed.is_none() {
                return Err(Error::Config("a seed is required in Monte Carlo modes".into()));
            }
        }
        if self.mode == Mode::Exact && self.detector.dark_count > 0.0 {
            return Err(Error::Config("dark counts are only modeled in Monte Carlo modes".into()));
        }
        if let Angles::Sweep(grid) = &self.angles {
            let thetas = grid.thetas();
            if thetas.is_empty() || thetas.iter().any(|t| !t.is_finite()) {
                return Err(Error::Config("sweep grid must contain finite angles".into()));
            }
        }
        Ok(())
    }

    pub fn quad(&self) -> Result<BellQuad> {
        match &self.angles {
            Angles::Quad(q) => Ok(*q),
            Angles::Sweep(_) => Err(Error::Config("this command needs an angle quad, not a sweep".into())),
        }
    }

    pub fn sweep_thetas(&self) -> Result<Vec<f64>> {
        match &self.angles {
            Angles::Sweep(g) => Ok(g.thetas()),
            Angles::Quad(_) => Err(Error::Config("this command needs a sweep grid".into())),
        }
    }

    /// Seed, or zero in exact mode where it is unused.
    pub fn seed_or_default(&self) -> u64 {
        self.seed.unwrap_or(0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_gets_defaults() {
        let c = ExperimentConfig::from_json(r#"{"source": {"mu_a": 0.05, "mu_b": 0.05}}"#).unwrap();
        assert_eq!(c.mode, Mode::Exact);
        assert_eq!(c.repetitions, 10);
        assert_eq!(c.source.n_max, 4);
        assert_eq!(c.quad().unwrap(), BellQuad::BELL_TEST);
        assert_eq!(c.detector, DetectorModel::default());
    }

    #[test]
    fn monte_carlo_needs_seed_and_trials() {
        let no_seed = r#"{"source": {"mu_a": 0.05, "mu_b": 0.05}, "mode": "mc_fock"}"#;
        assert!(matches!(ExperimentConfig::from_json(no_seed), Err(Error::Config(_))));
        let no_trials = r#"{"source": {"mu_a": 0.05, "mu_b": 0.05}, "mode": "mc_fock", "seed": 1, "trials": 0}"#;
        assert!(ExperimentConfig::from_json(no_trials).is_err());
        let ok = r#"{"source": {"mu_a": 0.05, "mu_b": 0.05}, "mode": "mc_coherent", "seed": 1}"#;
        assert!(ExperimentConfig::from_json(ok).is_ok());
    }

    #[test]
    fn rejects_bad_values() {
        for bad in [
            r#"{"source": {"mu_a": -0.05, "mu_b": 0.05}}"#,
            r#"{"source": {"mu_a": 0.05, "mu_b": 0.05, "blocked": "block_a"}}"#,
            r#"{"source": {"mu_a": 0.05, "mu_b": 0.05}, "repetitions": 0}"#,
            r#"{"source": {"mu_a": 0.05, "mu_b": 0.05}, "detector": {"visibility": 2.0}}"#,
            r#"{"source": {"mu_a": 0.05, "mu_b": 0.05}, "bogus": 1}"#,
            r#"{"source": {"mu_a": 0.05, "mu_b": 0.05}, "angles": {"sweep": {"thetas": []}}}"#,
            r#"{"source": {"mu_a": 0.05}}"#,
        ] {
            assert!(ExperimentConfig::from_json(bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn sweep_grids() {
        let g = SweepGrid::linspace(0.0, 1.0, 5);
        assert_eq!(g.thetas(), vec![0.0, 0.25, 0.5, 0.75, 1.0]);
        let c = ExperimentConfig::from_json(
            r#"{"source": {"mu_a": 0.05, "mu_b": 0.05}, "angles": {"sweep": {"thetas": [0.0, 0.5]}}}"#,
        )
        .unwrap();
        assert_eq!(c.sweep_thetas().unwrap(), vec![0.0, 0.5]);
        assert!(c.quad().is_err());
    }

    #[test]
    fn round_trip() {
        let c = ExperimentConfig {
            mode: Mode::McCoherent,
            seed: Some(42),
            angles: Angles::Sweep(SweepGrid::linspace(0.0, 3.0, 7)),
            output: OutputSpec {
                path: Some("out.csv".into()),
                format: Some(OutputFormat::Csv),
            },
            ..Default::default()
        };
        let back = ExperimentConfig::from_json(&c.to_json()).unwrap();
        assert_eq!(back, c);
    }
}
