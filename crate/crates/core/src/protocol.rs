//! Three-configuration protocol: for every analyzer setting run the source
//! with both arms open, with arm a blocked and with arm b blocked, then
//! subtract and form correlations.
//!
//! Monte Carlo cells are numbered `(point << 20) | (configuration << 16) | rep`
//! and each cell draws from its own seeded streams, so results do not depend
//! on scheduling.

use rayon::prelude::*;

use crate::chsh::{
    correlation_e, mean_and_std, subtract_background, ChshResult, RateTable, SubtractedCorrelation,
    SweepPoint,
};
use crate::config::{BellQuad, ExperimentConfig, Mode};
use crate::error::{Error, Result};
use crate::measurement::{exact_rates, AnalyzerSetting, CountTable, DetectorModel};
use crate::montecarlo::{run_parallel, CoherentSampler, FockSampler};
use crate::source::{Blocked, SourceSpec};

const MAX_POINTS: usize = 1 << 20;
const MAX_REPETITIONS: u32 = 1 << 16;

/// How one configuration is evaluated.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunPlan {
    pub mode: Mode,
    pub trials: u64,
    pub seed: u64,
}

impl RunPlan {
    pub fn exact() -> Self {
        RunPlan {
            mode: Mode::Exact,
            trials: 0,
            seed: 0,
        }
    }

    pub fn from_config(config: &ExperimentConfig) -> Self {
        if config.mode == Mode::Exact {
            return Self::exact();
        }
        RunPlan {
            mode: config.mode,
            trials: config.trials,
            seed: config.seed_or_default(),
        }
    }
}

pub fn cell_id(point: usize, configuration: usize, repetition: u32) -> u64 {
    debug_assert!(point < MAX_POINTS && configuration < 16 && repetition < MAX_REPETITIONS);
    ((point as u64) << 20) | ((configuration as u64) << 16) | u64::from(repetition)
}

/// Count table for one configuration (one value of `spec.blocked`).
pub fn run_configuration(
    spec: &SourceSpec,
    setting: &AnalyzerSetting,
    detector: &DetectorModel,
    plan: &RunPlan,
    cell: u64,
) -> Result<CountTable> {
    match plan.mode {
        Mode::Exact => exact_rates(spec, setting, detector),
        Mode::McFock => Ok(run_parallel(
            &FockSampler::new(spec, setting, detector)?,
            plan.trials,
            plan.seed,
            cell,
        )),
        Mode::McCoherent => Ok(run_parallel(
            &CoherentSampler::new(spec, setting, detector)?,
            plan.trials,
            plan.seed,
            cell,
        )),
    }
}

/// The three tables of one setting and repetition.
#[derive(Debug, Clone, PartialEq)]
pub struct ProtocolTables {
    pub full: CountTable,
    pub blocked_a: CountTable,
    pub blocked_b: CountTable,
}

impl ProtocolTables {
    pub fn run(
        spec: &SourceSpec,
        setting: &AnalyzerSetting,
        detector: &DetectorModel,
        plan: &RunPlan,
        point: usize,
        repetition: u32,
    ) -> Result<Self> {
        let run = |k: usize| {
            let blocked = Blocked::ALL[k];
            run_configuration(&spec.with_blocked(blocked), setting, detector, plan, cell_id(point, k, repetition))
        };
        Ok(ProtocolTables {
            full: run(0)?,
            blocked_a: run(1)?,
            blocked_b: run(2)?,
        })
    }

    pub fn tables(&self) -> [&CountTable; 3] {
        [&self.full, &self.blocked_a, &self.blocked_b]
    }

    /// Subtracted correlation plus the number of clamped entries.
    pub fn correlation(&self) -> Result<(SubtractedCorrelation, usize)> {
        let sub = subtract_background(&self.full, &self.blocked_a, &self.blocked_b)?;
        Ok((correlation_e(&sub.table)?, sub.clamped.len()))
    }

    /// Correlation of the open-arm table without subtraction.
    pub fn raw_correlation(&self) -> Result<SubtractedCorrelation> {
        correlation_e(&RateTable::from_counts(&self.full))
    }
}

/// Result of a CHSH run together with its inputs.
#[derive(Debug, Clone)]
pub struct ChshReport {
    pub result: ChshResult,
    /// The same statistic computed from the open-arm tables alone.
    pub raw_result: ChshResult,
    /// `tables[rep][setting]`.
    pub tables: Vec<[ProtocolTables; 4]>,
    /// Subtracted entries clamped at zero, over all settings and repetitions.
    pub clamped: usize,
    pub repetitions: u32,
}

/// Combines per-repetition correlation quads. A single repetition keeps
/// the propagated errors; several use the spread across repetitions.
fn combine(per_rep: &[[SubtractedCorrelation; 4]]) -> ChshResult {
    if let [only] = per_rep {
        return crate::chsh::chsh_s(only);
    }
    let mut e_values = [0.0; 4];
    let mut e_errors = [0.0; 4];
    for k in 0..4 {
        let es: Vec<f64> = per_rep.iter().map(|q| q[k].e_value).collect();
        (e_values[k], e_errors[k]) = mean_and_std(&es);
    }
    let s_reps: Vec<f64> = per_rep
        .iter()
        .map(|q| crate::chsh::chsh_combination(&q.each_ref().map(|c| c.e_value)))
        .collect();
    let (_, s_error) = mean_and_std(&s_reps);
    ChshResult {
        s_value: crate::chsh::chsh_combination(&e_values),
        e_values,
        e_errors,
        s_error,
        eta_fit: None,
    }
}

pub fn run_chsh_with(
    spec: &SourceSpec,
    detector: &DetectorModel,
    quad: &BellQuad,
    plan: &RunPlan,
    repetitions: u32,
) -> Result<ChshReport> {
    if repetitions == 0 || repetitions >= MAX_REPETITIONS {
        return Err(Error::InvalidArgument(format!("repetitions must be in 1..{MAX_REPETITIONS}")));
    }
    let settings = quad.settings();
    // Exact tables do not fluctuate; one evaluation stands for all repetitions.
    let reps = if plan.mode == Mode::Exact { 1 } else { repetitions };
    let jobs: Vec<(u32, usize)> = (0..reps).flat_map(|r| (0..4).map(move |k| (r, k))).collect();
    let runs: Vec<ProtocolTables> = jobs
        .par_iter()
        .map(|&(r, k)| ProtocolTables::run(spec, &settings[k], detector, plan, k, r))
        .collect::<Result<_>>()?;
    let mut tables = Vec::with_capacity(reps as usize);
    let mut subtracted = Vec::with_capacity(reps as usize);
    let mut raw = Vec::with_capacity(reps as usize);
    let mut clamped = 0;
    for chunk in runs.chunks_exact(4) {
        let quad_tables: [ProtocolTables; 4] = std::array::from_fn(|k| chunk[k].clone());
        let mut corr = Vec::with_capacity(4);
        let mut raw_corr = Vec::with_capacity(4);
        for t in &quad_tables {
            let (c, n) = t.correlation()?;
            clamped += n;
            corr.push(c);
            raw_corr.push(t.raw_correlation()?);
        }
        subtracted.push(<[SubtractedCorrelation; 4]>::try_from(corr).expect("four settings"));
        raw.push(<[SubtractedCorrelation; 4]>::try_from(raw_corr).expect("four settings"));
        tables.push(quad_tables);
    }
    if clamped > 0 {
        log::warn!("{clamped} subtracted entries were negative and clamped to zero");
    }
    Ok(ChshReport {
        result: combine(&subtracted),
        raw_result: combine(&raw),
        tables,
        clamped,
        repetitions: reps,
    })
}

/// Runs the CHSH protocol described by `config` (which must use an angle quad).
pub fn run_chsh(config: &ExperimentConfig) -> Result<ChshReport> {
    config.validate()?;
    run_chsh_with(
        &config.source,
        &config.detector,
        &config.quad()?,
        &RunPlan::from_config(config),
        config.repetitions,
    )
}

/// Subtracted correlation at `(α, β) = (θ, 0)` for every `θ`, as mean and
/// standard deviation over `repetitions` runs.
pub fn sweep_correlation(
    spec: &SourceSpec,
    detector: &DetectorModel,
    thetas: &[f64],
    plan: &RunPlan,
    repetitions: u32,
) -> Result<Vec<SweepPoint>> {
    if repetitions == 0 || repetitions >= MAX_REPETITIONS {
        return Err(Error::InvalidArgument(format!("repetitions must be in 1..{MAX_REPETITIONS}")));
    }
    if thetas.len() >= MAX_POINTS {
        return Err(Error::InvalidArgument("too many sweep points".into()));
    }
    let reps = if plan.mode == Mode::Exact { 1 } else { repetitions };
    let jobs: Vec<(usize, u32)> = (0..thetas.len()).flat_map(|p| (0..reps).map(move |r| (p, r))).collect();
    let es: Vec<f64> = jobs
        .par_iter()
        .map(|&(p, r)| {
            let setting = AnalyzerSetting::new(thetas[p], 0.0);
            let tables = ProtocolTables::run(spec, &setting, detector, plan, p, r)?;
            Ok(tables.correlation()?.0.e_value)
        })
        .collect::<Result<_>>()?;
    Ok(thetas
        .iter()
        .zip(es.chunks_exact(reps as usize))
        .map(|(&theta, e)| {
            let (e_mean, e_std) = mean_and_std(e);
            SweepPoint {
                theta,
                e_mean,
                e_std,
                trials: plan.trials,
                repetitions: reps,
            }
        })
        .collect())
}

/// Runs the sweep described by `config` (which must use a sweep grid).
pub fn run_sweep(config: &ExperimentConfig) -> Result<Vec<SweepPoint>> {
    config.validate()?;
    sweep_correlation(
        &config.source,
        &config.detector,
        &config.sweep_thetas()?,
        &RunPlan::from_config(config),
        config.repetitions,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chsh::ideal_correlation;
    use std::f64::consts::{PI, SQRT_2};

    #[test]
    fn exact_bell_quad() {
        let spec = SourceSpec::new(0.05, 0.05).unwrap();
        let report = run_chsh_with(&spec, &DetectorModel::default(), &BellQuad::BELL_TEST, &RunPlan::exact(), 10)
            .unwrap();
        assert!((report.result.s_value - 2.0 * SQRT_2).abs() < 1e-9);
        assert_eq!(report.result.s_error, 0.0);
        assert_eq!(report.repetitions, 1);
        assert_eq!(report.clamped, 0);
        assert!(report.raw_result.s_value < report.result.s_value);
    }

    #[test]
    fn exact_sweep_follows_singlet_law() {
        let spec = SourceSpec::new(0.05, 0.05).unwrap();
        let thetas: Vec<f64> = (0..9).map(|k| k as f64 * PI / 8.0).collect();
        let points = sweep_correlation(&spec, &DetectorModel::default(), &thetas, &RunPlan::exact(), 10).unwrap();
        for p in &points {
            assert!((p.e_mean - ideal_correlation(p.theta)).abs() < 1e-9, "{p:?}");
            assert_eq!(p.e_std, 0.0);
        }
    }

    #[test]
    fn monte_carlo_is_seed_deterministic() {
        let spec = SourceSpec::new(0.1, 0.1).unwrap();
        let plan = RunPlan {
            mode: Mode::McCoherent,
            trials: 100_000,
            seed: 9,
        };
        let thetas = [0.0, 0.4];
        let a = sweep_correlation(&spec, &DetectorModel::default(), &thetas, &plan, 3).unwrap();
        let b = sweep_correlation(&spec, &DetectorModel::default(), &thetas, &plan, 3).unwrap();
        assert_eq!(a, b);
        let other = RunPlan { seed: 10, ..plan };
        let c = sweep_correlation(&spec, &DetectorModel::default(), &thetas, &other, 3).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn cells_are_distinct() {
        let mut seen = std::collections::HashSet::new();
        for p in 0..5 {
            for k in 0..3 {
                for r in 0..12 {
                    assert!(seen.insert(cell_id(p, k, r)));
                }
            }
        }
    }

    #[test]
    fn rejects_zero_repetitions() {
        let spec = SourceSpec::default();
        assert!(sweep_correlation(&spec, &DetectorModel::default(), &[0.0], &RunPlan::exact(), 0).is_err());
    }
}
