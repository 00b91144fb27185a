//! Event-by-event coincidence samplers.
//!
//! [`FockSampler`] draws photon numbers per arm, propagates the basis state
//! exactly and samples one output configuration. [`CoherentSampler`] draws
//! random-phase coherent amplitudes, propagates them classically and draws
//! Poisson photon numbers at the detectors. Both produce the same
//! statistics.
//!
//! Parallel runs split trials into fixed-size batches; batch `k` of cell
//! `c` uses a ChaCha8 generator seeded with the base seed on stream
//! `(c << 24) | k`. The result is therefore a function of the seed alone,
//! not of the number of worker threads.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::Result;
use crate::fock::{ModeLabel, StateVector};
use crate::measurement::{
    classify, pipeline_transform, AnalyzerSetting, CountTable, DetectorModel, Outcome, DETECTOR_MODES,
};
use crate::source::{
    input_basis, sample_coherent_amplitudes, InputSampler, PoissonTable, SourceSpec, ARM_A_MODE,
    ARM_B_MODE,
};

/// Trials per independently seeded batch.
pub const BATCH_TRIALS: u64 = 1 << 16;

const MAX_BATCHES: u64 = 1 << 24;

pub trait CoincidenceSampler: Sync {
    /// Runs `trials` trials on the given stream.
    fn run<R: Rng + ?Sized>(&self, trials: u64, rng: &mut R) -> CountTable;
}

/// Shared detection stage: loss, dark counts, classification, visibility.
#[derive(Debug, Clone)]
struct Detection {
    model: DetectorModel,
    dark: Option<PoissonTable>,
}

impl Detection {
    fn new(model: &DetectorModel) -> Result<Self> {
        model.validate()?;
        let dark = if model.dark_count > 0.0 {
            Some(PoissonTable::untruncated(model.dark_count)?)
        } else {
            None
        };
        Ok(Detection { model: *model, dark })
    }

    fn has_dark_counts(&self) -> bool {
        self.dark.is_some()
    }

    fn record<R: Rng + ?Sized>(&self, mut photons: [u32; 4], thin: bool, rng: &mut R, counts: &mut [f64; 4]) {
        if thin && self.model.efficiency < 1.0 {
            for n in photons.iter_mut() {
                *n = (0..*n).filter(|_| rng.random::<f64>() < self.model.efficiency).count() as u32;
            }
        }
        if let Some(dark) = &self.dark {
            for n in photons.iter_mut() {
                *n += dark.sample(rng);
            }
        }
        let Some(mut outcome) = classify(photons, self.model.coincidence) else {
            return;
        };
        if self.model.visibility < 1.0 && rng.random::<f64>() >= self.model.visibility {
            outcome = Outcome::ALL[rng.random_range(0..4)];
        }
        counts[outcome.index()] += 1.0;
    }
}

/// Cumulative distribution over detector photon numbers for one input.
#[derive(Debug, Clone, Default)]
struct OutputDistribution {
    cumulative: Vec<f64>,
    photons: Vec<[u32; 4]>,
}

impl OutputDistribution {
    fn from_state(state: &StateVector) -> Self {
        let mut acc = 0.0;
        let mut out = OutputDistribution::default();
        for (b, a) in state.iter() {
            acc += a.norm_sqr();
            out.cumulative.push(acc);
            out.photons.push(DETECTOR_MODES.map(|m| b.get(m)));
        }
        out
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> [u32; 4] {
        let u = rng.random::<f64>() * self.cumulative.last().copied().unwrap_or(1.0);
        let k = self.cumulative.partition_point(|&c| c <= u);
        self.photons[k.min(self.photons.len() - 1)]
    }
}

/// Photon-number (Fock) sampler.
#[derive(Debug, Clone)]
pub struct FockSampler {
    template: CountTable,
    inputs: InputSampler,
    /// Indexed by `i * (n_max + 1) + j`.
    outputs: Vec<OutputDistribution>,
    stride: usize,
    detection: Detection,
}

impl FockSampler {
    pub fn new(spec: &SourceSpec, setting: &AnalyzerSetting, detector: &DetectorModel) -> Result<Self> {
        let inputs = InputSampler::new(spec)?;
        let detection = Detection::new(detector)?;
        let pipeline = pipeline_transform(setting);
        let stride = spec.n_max as usize + 1;
        let mut outputs = Vec::with_capacity(stride * stride);
        for i in 0..=spec.n_max {
            for j in 0..=spec.n_max {
                let out = pipeline.apply(&StateVector::basis(input_basis(i, j)))?;
                outputs.push(OutputDistribution::from_state(&out));
            }
        }
        let (ta, tb) = inputs.arm_tables();
        let miss = 1.0 - detector.efficiency;
        // probability that every photon of an arm is lost
        let all_lost = |t: &PoissonTable| -> f64 {
            t.probabilities()
                .iter()
                .enumerate()
                .map(|(n, w)| w * miss.powi(n as i32))
                .sum()
        };
        let vacuum_weight = all_lost(ta) * all_lost(tb);
        Ok(FockSampler {
            template: CountTable::empty(*setting, spec, vacuum_weight),
            inputs,
            outputs,
            stride,
            detection,
        })
    }
}

impl CoincidenceSampler for FockSampler {
    fn run<R: Rng + ?Sized>(&self, trials: u64, rng: &mut R) -> CountTable {
        let mut counts = [0.0; 4];
        let dark = self.detection.has_dark_counts();
        for _ in 0..trials {
            let (i, j) = self.inputs.sample_numbers(rng);
            if i + j == 0 && !dark {
                continue;
            }
            let photons = self.outputs[i as usize * self.stride + j as usize].sample(rng);
            self.detection.record(photons, true, rng, &mut counts);
        }
        CountTable {
            counts,
            trials,
            ..self.template
        }
    }
}

/// Semiclassical sampler over random-phase coherent amplitudes.
///
/// Independent Poisson counts at the four detectors are drawn as a total
/// `N ~ Poisson(η_d(μ_a + μ_b))` split multinomially by the output
/// intensities; for a lossless unitary the total mean does not depend on the
/// phases, so this is the same distribution.
#[derive(Debug, Clone)]
pub struct CoherentSampler {
    template: CountTable,
    spec: SourceSpec,
    total: PoissonTable,
    /// Rows: detector modes; columns: arm a, arm b.
    columns: [[Complex64; 2]; 4],
    input_mean: f64,
    detection: Detection,
}

impl CoherentSampler {
    pub fn new(spec: &SourceSpec, setting: &AnalyzerSetting, detector: &DetectorModel) -> Result<Self> {
        spec.validate()?;
        let detection = Detection::new(detector)?;
        let pipeline = pipeline_transform(setting);
        let column = |from: ModeLabel| DETECTOR_MODES.map(|to| pipeline.entry(to, from));
        let (ca, cb) = (column(ARM_A_MODE), column(ARM_B_MODE));
        let columns = std::array::from_fn(|k| [ca[k], cb[k]]);
        let input_mean = spec.effective_mu_a() + spec.effective_mu_b();
        let detected_mean = detector.efficiency * input_mean;
        Ok(CoherentSampler {
            template: CountTable::empty(*setting, spec, (-detected_mean).exp()),
            spec: *spec,
            total: PoissonTable::untruncated(detected_mean)?,
            columns,
            input_mean,
            detection,
        })
    }
}

impl CoincidenceSampler for CoherentSampler {
    fn run<R: Rng + ?Sized>(&self, trials: u64, rng: &mut R) -> CountTable {
        let mut counts = [0.0; 4];
        let dark = self.detection.has_dark_counts();
        for _ in 0..trials {
            let n = self.total.sample(rng);
            if n == 0 && !dark {
                continue;
            }
            let mut photons = [0u32; 4];
            if n > 0 {
                let (amp_a, amp_b) = sample_coherent_amplitudes(&self.spec, rng);
                let mut cumulative = [0.0; 4];
                let mut acc = 0.0;
                for (k, [ua, ub]) in self.columns.iter().enumerate() {
                    acc += (ua * amp_a + ub * amp_b).norm_sqr() / self.input_mean;
                    cumulative[k] = acc;
                }
                for _ in 0..n {
                    let u = rng.random::<f64>() * acc;
                    let k = cumulative.iter().position(|&c| u < c).unwrap_or(3);
                    photons[k] += 1;
                }
            }
            self.detection.record(photons, false, rng, &mut counts);
        }
        CountTable {
            counts,
            trials,
            ..self.template
        }
    }
}

/// Stream index for batch `batch` of cell `cell`.
pub fn stream_id(cell: u64, batch: u64) -> u64 {
    debug_assert!(batch < MAX_BATCHES && cell < (1 << 40));
    (cell << 24) | batch
}

/// Runs `trials` trials split into seeded batches across the rayon pool.
pub fn run_parallel<S: CoincidenceSampler>(sampler: &S, trials: u64, seed: u64, cell: u64) -> CountTable {
    let batches = trials.div_ceil(BATCH_TRIALS).max(1);
    assert!(batches < MAX_BATCHES, "too many trials for one cell");
    (0..batches)
        .into_par_iter()
        .map(|b| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(stream_id(cell, b));
            let n = BATCH_TRIALS.min(trials - b * BATCH_TRIALS);
            sampler.run(n, &mut rng)
        })
        .reduce_with(|x, y| x.merge(&y).expect("batches share one configuration"))
        .expect("at least one batch")
}

pub fn run_montecarlo_fock<R: Rng + ?Sized>(
    spec: &SourceSpec,
    setting: &AnalyzerSetting,
    detector: &DetectorModel,
    trials: u64,
    rng: &mut R,
) -> Result<CountTable> {
    Ok(FockSampler::new(spec, setting, detector)?.run(trials, rng))
}

pub fn run_montecarlo_coherent<R: Rng + ?Sized>(
    spec: &SourceSpec,
    setting: &AnalyzerSetting,
    detector: &DetectorModel,
    trials: u64,
    rng: &mut R,
) -> Result<CountTable> {
    Ok(CoherentSampler::new(spec, setting, detector)?.run(trials, rng))
}
