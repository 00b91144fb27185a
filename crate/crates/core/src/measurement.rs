//! Polarization analysis and coincidence detection behind the recombining
//! beam splitter.
//!
//! Each output port carries a half-wave plate and a polarizing beam
//! splitter. The analyzer rotates port c by `−α` and port d by `−β`, after
//! which the H mode of a port is the "+" detector and the V mode is "−".
//!
//! Rates in a [`CountTable`] are reported relative to the probability that
//! no signal photon reaches the detectors (see [`CountTable::rates`]). With
//! that normalization the two-photon coincidence rate of a Poisson source
//! is exactly `μ_aμ_b·P(·|1,1) + μ_a²/2·P(·|2,0) + μ_b²/2·P(·|0,2)`, so the
//! three-configuration subtraction isolates the `|1,1>` contribution.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::{DensityMixture, FockBasisState, ModeLabel, Polarization, Port, StateVector};
use crate::optics::ModeTransform;
use crate::source::{input_basis, two_mode_input, Blocked, SourceSpec};

/// Detector modes after the analyzers, in outcome order (c+, c−, d+, d−).
pub const DETECTOR_MODES: [ModeLabel; 4] = [
    ModeLabel::new(Port::C, Polarization::H),
    ModeLabel::new(Port::C, Polarization::V),
    ModeLabel::new(Port::D, Polarization::H),
    ModeLabel::new(Port::D, Polarization::V),
];

/// A joint outcome `(i, j)` at detectors c and d.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Outcome {
    PlusPlus,
    PlusMinus,
    MinusPlus,
    MinusMinus,
}

impl Outcome {
    pub const ALL: [Outcome; 4] = [
        Outcome::PlusPlus,
        Outcome::PlusMinus,
        Outcome::MinusPlus,
        Outcome::MinusMinus,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    /// `+1` for equal outcomes, `−1` otherwise.
    pub fn parity(self) -> f64 {
        match self {
            Outcome::PlusPlus | Outcome::MinusMinus => 1.0,
            Outcome::PlusMinus | Outcome::MinusPlus => -1.0,
        }
    }

    fn from_detectors(c_plus: bool, d_plus: bool) -> Self {
        match (c_plus, d_plus) {
            (true, true) => Outcome::PlusPlus,
            (true, false) => Outcome::PlusMinus,
            (false, true) => Outcome::MinusPlus,
            (false, false) => Outcome::MinusMinus,
        }
    }
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Outcome::PlusPlus => "++",
            Outcome::PlusMinus => "+-",
            Outcome::MinusPlus => "-+",
            Outcome::MinusMinus => "--",
        };
        f.write_str(s)
    }
}

/// Analyzer angles in radians; polarization angles are meaningful mod π.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct AnalyzerSetting {
    pub alpha: f64,
    pub beta: f64,
}

impl AnalyzerSetting {
    pub fn new(alpha: f64, beta: f64) -> Self {
        AnalyzerSetting { alpha, beta }
    }

    pub fn difference(&self) -> f64 {
        self.alpha - self.beta
    }

    fn same_as(&self, other: &AnalyzerSetting) -> bool {
        let close = |x: f64, y: f64| {
            let d = (x - y).rem_euclid(std::f64::consts::PI);
            d.min(std::f64::consts::PI - d) < 1e-12
        };
        close(self.alpha, other.alpha) && close(self.beta, other.beta)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CoincidenceSemantics {
    /// Exactly one photon at one detector of each port, none at the others.
    #[default]
    ExactOneOne,
    /// Exactly one detector of each port clicks (at least one photon).
    Threshold,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectorModel {
    #[serde(default = "one")]
    pub visibility: f64,
    #[serde(default = "one")]
    pub efficiency: f64,
    #[serde(default)]
    pub coincidence: CoincidenceSemantics,
    /// Mean dark counts per detector per trial. Monte Carlo modes only.
    #[serde(default)]
    pub dark_count: f64,
}

fn one() -> f64 {
    1.0
}

impl Default for DetectorModel {
    fn default() -> Self {
        DetectorModel {
            visibility: 1.0,
            efficiency: 1.0,
            coincidence: CoincidenceSemantics::ExactOneOne,
            dark_count: 0.0,
        }
    }
}

impl DetectorModel {
    pub fn with_visibility(self, visibility: f64) -> Self {
        DetectorModel { visibility, ..self }
    }

    pub fn with_efficiency(self, efficiency: f64) -> Self {
        DetectorModel { efficiency, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.visibility) {
            return Err(Error::InvalidArgument(format!("visibility {} not in [0, 1]", self.visibility)));
        }
        if !(self.efficiency > 0.0 && self.efficiency <= 1.0) {
            return Err(Error::InvalidArgument(format!("efficiency {} not in (0, 1]", self.efficiency)));
        }
        if !self.dark_count.is_finite() || self.dark_count < 0.0 {
            return Err(Error::InvalidArgument(format!("dark count {}", self.dark_count)));
        }
        Ok(())
    }

    /// Mixes an ideal outcome distribution with the uniform one so that the
    /// correlation scales by the visibility while the total is unchanged.
    pub fn apply_visibility(&self, probs: [f64; 4]) -> [f64; 4] {
        let total: f64 = probs.iter().sum();
        probs.map(|p| self.visibility * p + (1.0 - self.visibility) * total / 4.0)
    }
}

/// Classifies photon numbers at (c+, c−, d+, d−).
pub fn classify(counts: [u32; 4], semantics: CoincidenceSemantics) -> Option<Outcome> {
    let [cp, cm, dp, dm] = counts;
    match semantics {
        CoincidenceSemantics::ExactOneOne => {
            if cp + cm != 1 || dp + dm != 1 {
                return None;
            }
            Some(Outcome::from_detectors(cp == 1, dp == 1))
        }
        CoincidenceSemantics::Threshold => {
            let c = (cp > 0, cm > 0);
            let d = (dp > 0, dm > 0);
            if c.0 == c.1 || d.0 == d.1 {
                return None;
            }
            Some(Outcome::from_detectors(c.0, d.0))
        }
    }
}

fn detector_counts(state: &FockBasisState) -> Option<[u32; 4]> {
    let counts = DETECTOR_MODES.map(|m| state.get(m));
    let detected: u32 = counts.iter().sum();
    (detected == state.total_photons()).then_some(counts)
}

/// Rotates port c by `−α` and port d by `−β`.
pub fn analyzer_transform(setting: &AnalyzerSetting) -> ModeTransform {
    ModeTransform::compose(
        &ModeTransform::polarization_rotator(Port::C, -setting.alpha),
        &ModeTransform::polarization_rotator(Port::D, -setting.beta),
    )
    .expect("canonical universe")
}

/// Recombining beam splitter followed by the analyzers.
pub fn pipeline_transform(setting: &AnalyzerSetting) -> ModeTransform {
    ModeTransform::compose(
        &ModeTransform::secondary_beam_splitter(),
        &analyzer_transform(setting),
    )
    .expect("canonical universe")
}

/// Coincidence counts (or probabilities) for one configuration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CountTable {
    pub setting: AnalyzerSetting,
    pub mu_a: f64,
    pub mu_b: f64,
    pub blocked: Blocked,
    /// Entries in [`Outcome::ALL`] order. Probabilities when `trials == 0`.
    pub counts: [f64; 4],
    pub trials: u64,
    /// Probability that no signal photon reaches the detectors.
    pub vacuum_weight: f64,
}

impl CountTable {
    pub fn empty(setting: AnalyzerSetting, spec: &SourceSpec, vacuum_weight: f64) -> Self {
        CountTable {
            setting,
            mu_a: spec.mu_a,
            mu_b: spec.mu_b,
            blocked: spec.blocked,
            counts: [0.0; 4],
            trials: 0,
            vacuum_weight,
        }
    }

    pub fn get(&self, outcome: Outcome) -> f64 {
        self.counts[outcome.index()]
    }

    pub fn is_exact(&self) -> bool {
        self.trials == 0
    }

    pub fn total(&self) -> f64 {
        self.counts.iter().sum()
    }

    /// Coincidences per trial, divided by the vacuum weight.
    pub fn rates(&self) -> [f64; 4] {
        let per = self.normalization();
        self.counts.map(|c| c / per)
    }

    /// Variance of each entry of [`rates`](Self::rates) from binomial
    /// counting statistics. Zero for exact tables.
    pub fn rate_variances(&self) -> [f64; 4] {
        if self.is_exact() {
            return [0.0; 4];
        }
        let n = self.trials as f64;
        let per = self.normalization();
        self.counts.map(|c| c * (1.0 - c / n) / (per * per))
    }

    fn normalization(&self) -> f64 {
        self.trials.max(1) as f64 * self.vacuum_weight
    }

    /// Adds the counts of two runs of the same configuration.
    pub fn merge(&self, other: &CountTable) -> Result<CountTable> {
        if self.is_exact() || other.is_exact() {
            return Err(Error::MismatchedTables("exact tables cannot be merged".into()));
        }
        self.check_same_configuration(other)?;
        let mut out = *self;
        for (o, c) in out.counts.iter_mut().zip(other.counts) {
            *o += c;
        }
        out.trials += other.trials;
        Ok(out)
    }

    fn check_same_configuration(&self, other: &CountTable) -> Result<()> {
        if !self.setting.same_as(&other.setting) {
            return Err(Error::MismatchedTables(format!(
                "settings ({}, {}) vs ({}, {})",
                self.setting.alpha, self.setting.beta, other.setting.alpha, other.setting.beta
            )));
        }
        if self.mu_a != other.mu_a || self.mu_b != other.mu_b || self.blocked != other.blocked {
            return Err(Error::MismatchedTables("source parameters differ".into()));
        }
        Ok(())
    }

    pub const CSV_HEADER: &'static str =
        "setting_alpha,setting_beta,mu_a,mu_b,blocked,n_pp,n_pm,n_mp,n_mm,trials";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{}",
            self.setting.alpha,
            self.setting.beta,
            self.mu_a,
            self.mu_b,
            self.blocked.as_str(),
            self.counts[0],
            self.counts[1],
            self.counts[2],
            self.counts[3],
            self.trials
        )
    }
}

fn check_on_input_ports(mixture: &DensityMixture) -> Result<()> {
    for c in mixture.components() {
        for (b, _) in c.state.iter() {
            if let Some((m, _)) = b.occupied_modes().find(|(m, _)| !matches!(m.port, Port::A | Port::B)) {
                return Err(Error::WrongPorts(m));
            }
        }
    }
    Ok(())
}

/// Ideal outcome probabilities of a pure state already on the detector
/// modes (no visibility or efficiency applied).
pub fn outcome_probabilities(state: &StateVector, semantics: CoincidenceSemantics) -> [f64; 4] {
    let mut probs = [0.0; 4];
    for (b, a) in state.iter() {
        if let Some(outcome) = detector_counts(b).and_then(|c| classify(c, semantics)) {
            probs[outcome.index()] += a.norm_sqr();
        }
    }
    probs
}

/// Coincidence probabilities for a mixture that already sits on ports c
/// and d (i.e. after the recombining beam splitter), analyzed at `setting`.
pub fn analyze_output(
    mixture: &DensityMixture,
    setting: &AnalyzerSetting,
    detector: &DetectorModel,
) -> Result<[f64; 4]> {
    detector.validate()?;
    let analyzed = analyzer_transform(setting).apply_mixture(mixture)?;
    Ok(detected_probabilities(&analyzed, detector))
}

fn detected_probabilities(analyzed: &DensityMixture, detector: &DetectorModel) -> [f64; 4] {
    let mut probs = [0.0; 4];
    for c in analyzed.components() {
        let p = outcome_probabilities(&c.state, detector.coincidence);
        for (acc, x) in probs.iter_mut().zip(p) {
            *acc += c.weight * x;
        }
    }
    let eff2 = detector.efficiency * detector.efficiency;
    detector.apply_visibility(probs).map(|p| p * eff2)
}

/// Propagates a source mixture on ports a, b through the recombining beam
/// splitter and the analyzers and returns the coincidence probabilities.
pub fn coincidence_probabilities(
    input: &DensityMixture,
    setting: &AnalyzerSetting,
    detector: &DetectorModel,
) -> Result<CountTable> {
    detector.validate()?;
    check_on_input_ports(input)?;
    let analyzed = pipeline_transform(setting).apply_mixture(input)?;
    let mut table = CountTable::empty(*setting, &SourceSpec::new(0.0, 0.0)?, 1.0);
    table.counts = detected_probabilities(&analyzed, detector);
    Ok(table)
}

/// `P_ij(1_c, 1_d | i_a, j_b)` for a pure Fock input.
pub fn conditional_probabilities(
    photons_a: u32,
    photons_b: u32,
    setting: &AnalyzerSetting,
    detector: &DetectorModel,
) -> Result<[f64; 4]> {
    let input = DensityMixture::pure(StateVector::basis(input_basis(photons_a, photons_b)));
    Ok(coincidence_probabilities(&input, setting, detector)?.counts)
}

/// Exact coincidence table `N_ij(μ_a, μ_b)` from the full truncated source
/// mixture. The vacuum weight is the (renormalized) weight of `|0,0>`.
pub fn exact_rates(
    spec: &SourceSpec,
    setting: &AnalyzerSetting,
    detector: &DetectorModel,
) -> Result<CountTable> {
    let source = two_mode_input(spec)?;
    let vacuum = StateVector::vacuum();
    let vacuum_weight = source
        .mixture
        .components()
        .iter()
        .filter(|c| c.state == vacuum)
        .map(|c| c.weight)
        .sum::<f64>();
    let probs = coincidence_probabilities(&source.mixture, setting, detector)?;
    let mut table = CountTable::empty(*setting, spec, vacuum_weight);
    table.counts = probs.counts;
    Ok(table)
}
