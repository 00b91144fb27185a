//! Background subtraction, correlation functions and the CHSH statistic.
//!
//! The Bell-state contribution is isolated by running three configurations
//! (both arms open, arm a blocked, arm b blocked) and subtracting the two
//! blocked tables from the open one.

use std::f64::consts::FRAC_PI_2;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measurement::{AnalyzerSetting, CountTable, Outcome};
use crate::source::Blocked;

/// Coincidence rates with per-entry variances.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateTable {
    pub setting: AnalyzerSetting,
    pub values: [f64; 4],
    pub variances: [f64; 4],
    pub trials: u64,
}

impl RateTable {
    pub fn from_counts(table: &CountTable) -> Self {
        RateTable {
            setting: table.setting,
            values: table.rates(),
            variances: table.rate_variances(),
            trials: table.trials,
        }
    }

    pub fn exact(setting: AnalyzerSetting, values: [f64; 4]) -> Self {
        RateTable {
            setting,
            values,
            variances: [0.0; 4],
            trials: 0,
        }
    }

    pub fn get(&self, outcome: Outcome) -> f64 {
        self.values[outcome.index()]
    }

    pub fn total(&self) -> f64 {
        self.values.iter().sum()
    }
}

/// Output of [`subtract_background`].
#[derive(Debug, Clone, PartialEq)]
pub struct Subtraction {
    pub table: RateTable,
    /// Entries that came out negative and were clamped to zero, with the
    /// value before clamping.
    pub clamped: Vec<(Outcome, f64)>,
}

/// `C_ij = N_ij(μ_a, μ_b) − N_ij(μ_a, 0) − N_ij(0, μ_b)`.
pub fn subtract_background(full: &CountTable, blocked_a: &CountTable, blocked_b: &CountTable) -> Result<Subtraction> {
    let roles = [
        (full, Blocked::None),
        (blocked_a, Blocked::BlockA),
        (blocked_b, Blocked::BlockB),
    ];
    for (table, role) in roles {
        if table.blocked != role {
            return Err(Error::MismatchedTables(format!(
                "expected a {} table, got {}",
                role.as_str(),
                table.blocked.as_str()
            )));
        }
        if table.setting != full.setting {
            return Err(Error::MismatchedTables(format!(
                "setting ({}, {}) differs from ({}, {})",
                table.setting.alpha, table.setting.beta, full.setting.alpha, full.setting.beta
            )));
        }
        if table.mu_a != full.mu_a || table.mu_b != full.mu_b {
            return Err(Error::MismatchedTables("nominal mean photon numbers differ".into()));
        }
        if table.trials != full.trials {
            return Err(Error::MismatchedTables(format!(
                "trial counts differ ({} vs {})",
                table.trials, full.trials
            )));
        }
    }
    let (f, a, b) = (
        RateTable::from_counts(full),
        RateTable::from_counts(blocked_a),
        RateTable::from_counts(blocked_b),
    );
    let mut clamped = Vec::new();
    let mut values = [0.0; 4];
    let mut variances = [0.0; 4];
    for outcome in Outcome::ALL {
        let k = outcome.index();
        let c = f.values[k] - a.values[k] - b.values[k];
        variances[k] = f.variances[k] + a.variances[k] + b.variances[k];
        if c < 0.0 {
            clamped.push((outcome, c));
            values[k] = 0.0;
        } else {
            values[k] = c;
        }
    }
    if !clamped.is_empty() {
        log::debug!("clamped negative subtracted entries: {clamped:?}");
    }
    Ok(Subtraction {
        table: RateTable {
            setting: full.setting,
            values,
            variances,
            trials: full.trials,
        },
        clamped,
    })
}

/// Normalized correlation `E` at one setting.
#[derive(Debug, Clone, PartialEq)]
pub struct SubtractedCorrelation {
    pub setting: AnalyzerSetting,
    /// The table `E` was computed from; absent for aggregated estimates.
    pub c_table: Option<RateTable>,
    pub e_value: f64,
    pub std_error: f64,
}

impl SubtractedCorrelation {
    /// An estimate not tied to a single table (e.g. a mean over repetitions).
    pub fn from_estimate(setting: AnalyzerSetting, e_value: f64, std_error: f64) -> Self {
        SubtractedCorrelation {
            setting,
            c_table: None,
            e_value,
            std_error,
        }
    }
}

/// `E = (C₊₊ − C₊₋ − C₋₊ + C₋₋) / ΣC`, with a first-order error from the
/// table variances.
pub fn correlation_e(c_table: &RateTable) -> Result<SubtractedCorrelation> {
    let total = c_table.total();
    if total.is_nan() || total <= 0.0 {
        return Err(Error::InsufficientStatistics);
    }
    let e = Outcome::ALL
        .iter()
        .map(|o| o.parity() * c_table.get(*o))
        .sum::<f64>()
        / total;
    let variance: f64 = Outcome::ALL
        .iter()
        .map(|o| {
            let d = (o.parity() - e) / total;
            d * d * c_table.variances[o.index()]
        })
        .sum();
    Ok(SubtractedCorrelation {
        setting: c_table.setting,
        c_table: Some(*c_table),
        e_value: e,
        std_error: variance.sqrt(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChshResult {
    /// At `(α,β)`, `(α,β′)`, `(α′,β)`, `(α′,β′)`.
    pub e_values: [f64; 4],
    #[serde(default)]
    pub e_errors: [f64; 4],
    #[serde(rename = "s")]
    pub s_value: f64,
    #[serde(rename = "s_err")]
    pub s_error: f64,
    #[serde(rename = "eta")]
    pub eta_fit: Option<f64>,
}

impl ChshResult {
    pub fn from_e_values(e_values: [f64; 4], e_errors: [f64; 4]) -> Self {
        let s_error = e_errors.iter().map(|x| x * x).sum::<f64>().sqrt();
        ChshResult {
            e_values,
            e_errors,
            s_value: chsh_combination(&e_values),
            s_error,
            eta_fit: None,
        }
    }

    pub fn violates_local_bound(&self) -> bool {
        self.s_value > 2.0
    }
}

/// `|E(α,β) − E(α,β′) + E(α′,β) + E(α′,β′)|`.
pub fn chsh_combination(e: &[f64; 4]) -> f64 {
    (e[0] - e[1] + e[2] + e[3]).abs()
}

pub fn chsh_s(quad: &[SubtractedCorrelation; 4]) -> ChshResult {
    ChshResult::from_e_values(quad.each_ref().map(|c| c.e_value), quad.each_ref().map(|c| c.std_error))
}

/// `|3E(θ) − E(3θ)|`, the CHSH value at the Bell test angles for a state
/// whose correlation depends only on the angle difference.
pub fn bell_angle_s(e_theta: &SubtractedCorrelation, e_3theta: &SubtractedCorrelation) -> ChshResult {
    let (e1, e3) = (e_theta.e_value, e_3theta.e_value);
    let (s1, s3) = (e_theta.std_error, e_3theta.std_error);
    ChshResult {
        e_values: [e1, e3, e1, e1],
        e_errors: [s1, s3, s1, s1],
        s_value: (3.0 * e1 - e3).abs(),
        s_error: (9.0 * s1 * s1 + s3 * s3).sqrt(),
        eta_fit: None,
    }
}

/// One point of a correlation sweep over the analyzer angle difference.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub theta: f64,
    pub e_mean: f64,
    pub e_std: f64,
    pub trials: u64,
    pub repetitions: u32,
}

impl SweepPoint {
    pub const CSV_HEADER: &'static str = "theta_radians,e_mean,e_std,trials,repetitions,e_ideal";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{}",
            self.theta,
            self.e_mean,
            self.e_std,
            self.trials,
            self.repetitions,
            ideal_correlation(self.theta)
        )
    }
}

/// Singlet correlation at angle difference `theta`: `−cos 2θ`.
pub fn ideal_correlation(theta: f64) -> f64 {
    -(2.0 * theta).cos()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VisibilityFit {
    pub eta: f64,
    pub std_error: f64,
}

/// Least-squares fit of `E(θ) = −η cos 2θ`.
///
/// Points are weighted by `1/e_std²` when every point carries a positive
/// error; otherwise the fit is unweighted and the error comes from the
/// residual scatter.
pub fn fit_visibility(points: &[SweepPoint]) -> Result<VisibilityFit> {
    if points.len() < 3 {
        return Err(Error::DegenerateFit(format!("need at least 3 points, got {}", points.len())));
    }
    let (lo, hi) = points
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| (lo.min(p.theta), hi.max(p.theta)));
    if hi - lo < FRAC_PI_2 - 1e-12 {
        return Err(Error::DegenerateFit(format!(
            "sweep spans {:.4} rad, less than half a period",
            hi - lo
        )));
    }
    let weighted = points.iter().all(|p| p.e_std > 0.0);
    let weight = |p: &SweepPoint| if weighted { 1.0 / (p.e_std * p.e_std) } else { 1.0 };
    let (mut sxx, mut sxy) = (0.0, 0.0);
    for p in points {
        let x = ideal_correlation(p.theta);
        sxx += weight(p) * x * x;
        sxy += weight(p) * x * p.e_mean;
    }
    if sxx < 1e-12 {
        return Err(Error::DegenerateFit("design has no cos 2θ signal".into()));
    }
    let eta = sxy / sxx;
    let std_error = if weighted {
        (1.0 / sxx).sqrt()
    } else {
        let rss: f64 = points
            .iter()
            .map(|p| (p.e_mean - eta * ideal_correlation(p.theta)).powi(2))
            .sum();
        (rss / (points.len() as f64 - 1.0) / sxx).sqrt()
    };
    Ok(VisibilityFit { eta, std_error })
}

/// Mean and sample standard deviation (zero for a single value).
pub fn mean_and_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}
