//! Built-in validation battery run by `bellsim validate`.

use std::f64::consts::{FRAC_PI_4, PI};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::chsh::ideal_correlation;
use crate::config::BellQuad;
use crate::error::Result;
use crate::fock::{trace_distance, FockBasisState, ModeLabel, Polarization, Port, StateVector};
use crate::measurement::{conditional_probabilities, exact_rates, AnalyzerSetting, DetectorModel};
use crate::optics::{BsConvention, ModeTransform};
use crate::protocol::{ProtocolTables, RunPlan};
use crate::source::{phase_averaged_coherent, poisson_mixture, SourceSpec};

#[derive(Debug, Clone, Serialize)]
pub struct CheckResult {
    pub name: String,
    pub residual: f64,
    pub tolerance: f64,
    pub passed: bool,
}

impl CheckResult {
    fn new(name: &str, residual: f64, tolerance: f64) -> Self {
        CheckResult {
            name: name.to_string(),
            residual,
            tolerance,
            passed: residual < tolerance,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct ValidationOptions {
    pub convention: BsConvention,
    pub phase_points: u32,
    pub seed: u64,
}

impl Default for ValidationOptions {
    fn default() -> Self {
        ValidationOptions {
            convention: BsConvention::Symmetric,
            phase_points: 256,
            seed: 0,
        }
    }
}

/// Trace distance between the `k`-point phase average of `|√μ e^{iφ}><..|`
/// and the Poisson mixture, at `μ = 0.2`, `n_max = 8`.
pub fn phase_average_residual(k: u32) -> Result<f64> {
    let mode = ModeLabel::new(Port::A, Polarization::H);
    let averaged = phase_averaged_coherent(0.2, 8, k)?;
    let poisson = poisson_mixture(mode, 0.2, 8)?;
    Ok(trace_distance(&averaged, &poisson))
}

/// Probability of a split `|1_cH,1_dH>` output for `|1_aH,1_bH>` through a
/// balanced beam splitter in the given convention. The transform is applied
/// without a unitarity check so that broken conventions still produce a
/// number.
pub fn hom_residual(convention: BsConvention) -> Result<f64> {
    let bs = ModeTransform::beam_splitter_with(convention, (Port::A, Port::B), (Port::C, Port::D), FRAC_PI_4)?;
    let h = Polarization::H;
    let input = StateVector::basis(FockBasisState::from_modes([
        (ModeLabel::new(Port::A, h), 1),
        (ModeLabel::new(Port::B, h), 1),
    ]));
    let split = FockBasisState::from_modes([(ModeLabel::new(Port::C, h), 1), (ModeLabel::new(Port::D, h), 1)]);
    Ok(bs.apply_unchecked(&input).amplitude(&split).norm_sqr())
}

/// Largest `‖U†U − I‖` over random chains of elements.
pub fn unitarity_residual(convention: BsConvention, samples: usize, seed: u64) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..samples {
        let mut u = ModeTransform::identity();
        for _ in 0..6 {
            let port = Port::ALL[rng.random_range(0..4)];
            let angle = rng.random_range(0.0..2.0 * PI);
            let element = match rng.random_range(0..3) {
                0 => ModeTransform::polarization_rotator(port, angle),
                1 => ModeTransform::phase_shift(port, angle),
                _ => {
                    let mut ports = Port::ALL;
                    let k = rng.random_range(0..4);
                    ports.swap(0, k);
                    let j = rng.random_range(1..4);
                    ports.swap(1, j);
                    ModeTransform::beam_splitter_with(convention, (ports[0], ports[1]), (ports[0], ports[1]), angle)?
                }
            };
            // multiply directly so non-unitary factors are measured, not rejected
            u = ModeTransform::from_matrix_unchecked(element.matrix() * u.matrix());
        }
        worst = worst.max(u.unitarity_deviation());
    }
    Ok(worst)
}

/// Largest entry of `N(μ,μ) − [μ²P(·|1,1) + μ²/2 P(·|2,0) + μ²/2 P(·|0,2)]`
/// over the Bell settings.
pub fn decomposition_residual(mu: f64) -> Result<f64> {
    let spec = SourceSpec::new(mu, mu)?;
    let detector = DetectorModel::default();
    let mut worst: f64 = 0.0;
    for setting in BellQuad::BELL_TEST.settings() {
        let rates = exact_rates(&spec, &setting, &detector)?.rates();
        let p11 = conditional_probabilities(1, 1, &setting, &detector)?;
        let p20 = conditional_probabilities(2, 0, &setting, &detector)?;
        let p02 = conditional_probabilities(0, 2, &setting, &detector)?;
        for k in 0..4 {
            let model = mu * mu * p11[k] + 0.5 * mu * mu * (p20[k] + p02[k]);
            worst = worst.max((rates[k] - model).abs());
        }
    }
    Ok(worst)
}

/// Largest deviation of the subtracted exact-mode correlation from
/// `−cos 2(α−β)` on a 4×4 angle grid.
pub fn singlet_law_residual(mu: f64) -> Result<f64> {
    let spec = SourceSpec::new(mu, mu)?;
    let detector = DetectorModel::default();
    let mut worst: f64 = 0.0;
    for i in 0..4 {
        for j in 0..4 {
            let setting = AnalyzerSetting::new(i as f64 * PI / 4.0, j as f64 * PI / 8.0);
            let tables = ProtocolTables::run(&spec, &setting, &detector, &RunPlan::exact(), 0, 0)?;
            let e = tables.correlation()?.0.e_value;
            worst = worst.max((e - ideal_correlation(setting.difference())).abs());
        }
    }
    Ok(worst)
}

pub fn run_validation(options: &ValidationOptions) -> Result<Vec<CheckResult>> {
    Ok(vec![
        CheckResult::new(
            &format!("phase-average identity (K = {})", options.phase_points),
            phase_average_residual(options.phase_points)?,
            1e-6,
        ),
        CheckResult::new("HOM cancellation", hom_residual(options.convention)?, 1e-12),
        CheckResult::new(
            "unitarity sample",
            unitarity_residual(options.convention, 64, options.seed)?,
            1e-9,
        ),
        CheckResult::new("source decomposition (mu = 0.05)", decomposition_residual(0.05)?, 1e-6),
        CheckResult::new("singlet law (mu = 0.05)", singlet_law_residual(0.05)?, 1e-9),
    ])
}
