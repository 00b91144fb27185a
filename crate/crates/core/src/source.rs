//! Phase-randomized weak coherent source.
//!
//! Each input arm carries a phase-averaged coherent state, which is a
//! Poisson mixture of Fock states. Arm a is horizontally polarized and arm b
//! vertically polarized (the half-wave plate is folded into the source).

use std::f64::consts::TAU;

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::{DensityMixture, FockBasisState, ModeLabel, Polarization, Port, StateVector};

pub const ARM_A_MODE: ModeLabel = ModeLabel::new(Port::A, Polarization::H);
pub const ARM_B_MODE: ModeLabel = ModeLabel::new(Port::B, Polarization::V);

pub const DEFAULT_N_MAX: u32 = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Blocked {
    #[default]
    None,
    BlockA,
    BlockB,
}

impl Blocked {
    pub const ALL: [Blocked; 3] = [Blocked::None, Blocked::BlockA, Blocked::BlockB];

    pub fn as_str(self) -> &'static str {
        match self {
            Blocked::None => "none",
            Blocked::BlockA => "block_a",
            Blocked::BlockB => "block_b",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceSpec {
    pub mu_a: f64,
    pub mu_b: f64,
    #[serde(default = "default_n_max")]
    pub n_max: u32,
    #[serde(default)]
    pub blocked: Blocked,
}

fn default_n_max() -> u32 {
    DEFAULT_N_MAX
}

impl Default for SourceSpec {
    fn default() -> Self {
        SourceSpec {
            mu_a: 0.05,
            mu_b: 0.05,
            n_max: DEFAULT_N_MAX,
            blocked: Blocked::None,
        }
    }
}

impl SourceSpec {
    pub fn new(mu_a: f64, mu_b: f64) -> Result<Self> {
        let spec = SourceSpec {
            mu_a,
            mu_b,
            ..Default::default()
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn with_blocked(self, blocked: Blocked) -> Self {
        SourceSpec { blocked, ..self }
    }

    pub fn with_n_max(self, n_max: u32) -> Self {
        SourceSpec { n_max, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, mu) in [("mu_a", self.mu_a), ("mu_b", self.mu_b)] {
            if !mu.is_finite() || mu < 0.0 {
                return Err(Error::InvalidArgument(format!("{name} = {mu} must be finite and >= 0")));
            }
        }
        Ok(())
    }

    /// Mean photon number reaching the recombining splitter from arm a.
    pub fn effective_mu_a(&self) -> f64 {
        match self.blocked {
            Blocked::BlockA => 0.0,
            _ => self.mu_a,
        }
    }

    pub fn effective_mu_b(&self) -> f64 {
        match self.blocked {
            Blocked::BlockB => 0.0,
            _ => self.mu_b,
        }
    }
}

/// `μⁿ e^{−μ} / n!`.
pub fn poisson_pmf(mu: f64, n: u32) -> Result<f64> {
    if !mu.is_finite() || mu < 0.0 {
        return Err(Error::InvalidArgument(format!("poisson mean {mu}")));
    }
    Ok(poisson_pmf_unchecked(mu, n))
}

fn poisson_pmf_unchecked(mu: f64, n: u32) -> f64 {
    (1..=n).fold((-mu).exp(), |p, k| p * mu / f64::from(k))
}

fn truncated_pmf(mu: f64, n_max: u32) -> Vec<f64> {
    (0..=n_max).map(|n| poisson_pmf_unchecked(mu, n)).collect()
}

/// Two-arm mixture together with the weight lost to truncation.
#[derive(Debug, Clone, PartialEq)]
pub struct SourceMixture {
    pub mixture: DensityMixture,
    pub discarded_weight: f64,
}

/// Unrenormalized product weights `P_a(i)·P_b(j)` for `i, j ≤ n_max`,
/// zero-weight pairs omitted.
pub fn input_weights(spec: &SourceSpec) -> Result<Vec<((u32, u32), f64)>> {
    spec.validate()?;
    let pa = truncated_pmf(spec.effective_mu_a(), spec.n_max);
    let pb = truncated_pmf(spec.effective_mu_b(), spec.n_max);
    let mut out = Vec::with_capacity(pa.len() * pb.len());
    for (i, wa) in pa.iter().enumerate() {
        for (j, wb) in pb.iter().enumerate() {
            let w = wa * wb;
            if w > 0.0 {
                out.push(((i as u32, j as u32), w));
            }
        }
    }
    Ok(out)
}

pub fn input_basis(i: u32, j: u32) -> FockBasisState {
    FockBasisState::from_modes([(ARM_A_MODE, i), (ARM_B_MODE, j)])
}

/// `ρ = Σ_{i,j ≤ n_max} P_a(i) P_b(j) |i_aH, j_bV><i_aH, j_bV|`, renormalized.
pub fn two_mode_input(spec: &SourceSpec) -> Result<SourceMixture> {
    let weights = input_weights(spec)?;
    let kept: f64 = weights.iter().map(|(_, w)| w).sum();
    let mixture = DensityMixture::from_components(
        weights
            .into_iter()
            .map(|((i, j), w)| (w / kept, StateVector::basis(input_basis(i, j)))),
    )?;
    Ok(SourceMixture {
        mixture,
        discarded_weight: (1.0 - kept).max(0.0),
    })
}

/// The two-photon sector: weights `μ_aμ_b`, `μ_a²/2`, `μ_b²/2` on
/// `|1,1>`, `|2,0>`, `|0,2>`, renormalized.
pub fn two_photon_component(spec: &SourceSpec) -> Result<DensityMixture> {
    spec.validate()?;
    let (ma, mb) = (spec.effective_mu_a(), spec.effective_mu_b());
    let raw = [
        (ma * mb, input_basis(1, 1)),
        (ma * ma / 2.0, input_basis(2, 0)),
        (mb * mb / 2.0, input_basis(0, 2)),
    ];
    let total: f64 = raw.iter().map(|(w, _)| w).sum();
    if total <= 0.0 {
        return Err(Error::DegenerateState);
    }
    DensityMixture::from_components(
        raw.into_iter()
            .map(|(w, b)| (w / total, StateVector::basis(b))),
    )
}

/// Diagonal Poisson mixture on a single mode, truncated at `n_max` and
/// renormalized.
pub fn poisson_mixture(mode: ModeLabel, mu: f64, n_max: u32) -> Result<DensityMixture> {
    poisson_pmf(mu, 0)?;
    let pmf = truncated_pmf(mu, n_max);
    let total: f64 = pmf.iter().sum();
    DensityMixture::from_components(
        pmf.into_iter()
            .enumerate()
            .map(|(n, p)| (p / total, StateVector::fock(mode, n as u32))),
    )
}

/// Coherent state `|√μ e^{iφ}>` on `mode`, truncated at `n_max` and renormalized.
pub fn coherent_state(mode: ModeLabel, mu: f64, phase: f64, n_max: u32) -> Result<StateVector> {
    poisson_pmf(mu, 0)?;
    let alpha = Complex64::from_polar(mu.sqrt(), phase);
    let mut amp = Complex64::new((-mu / 2.0).exp(), 0.0);
    let mut terms = Vec::with_capacity(n_max as usize + 1);
    for n in 0..=n_max {
        if n > 0 {
            amp *= alpha / f64::from(n).sqrt();
        }
        terms.push((FockBasisState::from_modes([(mode, n)]), amp));
    }
    StateVector::from_terms(terms).normalize()
}

/// Equal-weight mixture of truncated coherent states at `n_phases`
/// equally spaced phases in `[0, 2π)` on arm a's mode.
pub fn phase_averaged_coherent(mu: f64, n_max: u32, n_phases: u32) -> Result<DensityMixture> {
    if n_phases == 0 {
        return Err(Error::InvalidArgument("n_phases must be >= 1".into()));
    }
    let weight = 1.0 / f64::from(n_phases);
    let components = (0..n_phases)
        .map(|k| {
            let phase = TAU * f64::from(k) / f64::from(n_phases);
            coherent_state(ARM_A_MODE, mu, phase, n_max).map(|s| (weight, s))
        })
        .collect::<Result<Vec<_>>>()?;
    DensityMixture::from_components(components)
}

/// Inverse-CDF sampler over a truncated Poisson pmf. Consumes exactly one
/// uniform per draw.
#[derive(Debug, Clone)]
pub struct PoissonTable {
    pmf: Vec<f64>,
    cdf: Vec<f64>,
}

impl PoissonTable {
    pub fn new(mu: f64, n_max: u32) -> Result<Self> {
        poisson_pmf(mu, 0)?;
        let pmf = truncated_pmf(mu, n_max);
        let total: f64 = pmf.iter().sum();
        let pmf: Vec<f64> = pmf.iter().map(|p| p / total).collect();
        let mut acc = 0.0;
        let mut cdf: Vec<f64> = pmf
            .iter()
            .map(|p| {
                acc += p;
                acc
            })
            .collect();
        *cdf.last_mut().expect("n_max >= 0 gives one entry") = f64::INFINITY;
        Ok(PoissonTable { pmf, cdf })
    }

    /// Cutoff past the mean beyond which the next probability is below
    /// `1e-18`, capped at 200.
    pub fn untruncated(mu: f64) -> Result<Self> {
        poisson_pmf(mu, 0)?;
        let mut n = 0u32;
        while (f64::from(n) < mu || poisson_pmf_unchecked(mu, n + 1) >= 1e-18) && n < 200 {
            n += 1;
        }
        Self::new(mu, n)
    }

    pub fn n_max(&self) -> u32 {
        self.cdf.len() as u32 - 1
    }

    /// Renormalized probabilities of drawing `0..=n_max`.
    pub fn probabilities(&self) -> &[f64] {
        &self.pmf
    }

    /// Probability of drawing zero.
    pub fn zero_probability(&self) -> f64 {
        self.pmf[0]
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> u32 {
        let u: f64 = rng.random();
        self.cdf.iter().position(|&c| u < c).unwrap_or(self.cdf.len() - 1) as u32
    }
}

/// Draws photon numbers for both arms.
#[derive(Debug, Clone)]
pub struct InputSampler {
    arm_a: PoissonTable,
    arm_b: PoissonTable,
}

impl InputSampler {
    pub fn new(spec: &SourceSpec) -> Result<Self> {
        spec.validate()?;
        Ok(InputSampler {
            arm_a: PoissonTable::new(spec.effective_mu_a(), spec.n_max)?,
            arm_b: PoissonTable::new(spec.effective_mu_b(), spec.n_max)?,
        })
    }

    /// Photon numbers `(i, j)` in arms a and b; two uniforms per call.
    pub fn sample_numbers<R: Rng + ?Sized>(&self, rng: &mut R) -> (u32, u32) {
        let i = self.arm_a.sample(rng);
        let j = self.arm_b.sample(rng);
        (i, j)
    }

    pub fn arm_tables(&self) -> (&PoissonTable, &PoissonTable) {
        (&self.arm_a, &self.arm_b)
    }
}

/// Draws `|i_aH, j_bV>` with independent truncated-Poisson photon numbers.
pub fn sample_input<R: Rng + ?Sized>(spec: &SourceSpec, rng: &mut R) -> Result<FockBasisState> {
    let sampler = InputSampler::new(spec)?;
    let (i, j) = sampler.sample_numbers(rng);
    Ok(input_basis(i, j))
}

/// `(√μ_a e^{iφ_a}, √μ_b e^{iφ_b})` with independent uniform phases. Both
/// phases are always drawn so the stream position does not depend on the
/// blocking configuration.
pub fn sample_coherent_amplitudes<R: Rng + ?Sized>(
    spec: &SourceSpec,
    rng: &mut R,
) -> (Complex64, Complex64) {
    let phi_a = TAU * rng.random::<f64>();
    let phi_b = TAU * rng.random::<f64>();
    (
        Complex64::from_polar(spec.effective_mu_a().sqrt(), phi_a),
        Complex64::from_polar(spec.effective_mu_b().sqrt(), phi_b),
    )
}
