//! Simulation of a polarization Bell test built from two independent,
//! phase-randomized weak coherent sources.
//!
//! Photons from arm a (horizontal) and arm b (vertical) meet on a balanced
//! beam splitter; each output port carries a polarization analyzer and two
//! detectors. Running the source with both arms open and with either arm
//! blocked and subtracting the blocked tables isolates the two-photon
//! singlet contribution, whose correlations violate the CHSH inequality.
//!
//! The crate has an exact density-matrix path ([`measurement::exact_rates`])
//! and two Monte Carlo samplers ([`montecarlo`]); [`protocol`] runs the
//! three-configuration scheme on top of either.

pub mod chsh;
pub mod config;
pub mod error;
pub mod fock;
pub mod measurement;
pub mod montecarlo;
pub mod optics;
pub mod protocol;
pub mod source;
pub mod validation;

pub use chsh::{
    bell_angle_s, chsh_s, correlation_e, fit_visibility, ideal_correlation, subtract_background, ChshResult,
    RateTable, SubtractedCorrelation, SweepPoint, VisibilityFit,
};
pub use config::{Angles, BellQuad, ExperimentConfig, Mode, OutputFormat, SweepGrid};
pub use error::{Error, Result};
pub use fock::{DensityMixture, FockBasisState, ModeLabel, Polarization, Port, StateVector};
pub use measurement::{AnalyzerSetting, CoincidenceSemantics, CountTable, DetectorModel, Outcome};
pub use optics::{BsConvention, ModeTransform};
pub use protocol::{run_chsh, run_sweep, sweep_correlation, ChshReport, ProtocolTables, RunPlan};
pub use source::{Blocked, SourceSpec};
