use std::f64::consts::PI;
use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use bellsim_core::chsh::{fit_visibility, SweepPoint};
use bellsim_core::config::{Angles, ExperimentConfig, Mode, OutputFormat, SweepGrid};
use bellsim_core::fock::DensityMixture;
use bellsim_core::measurement::{analyzer_transform, pipeline_transform, AnalyzerSetting, CountTable};
use bellsim_core::optics::{BsConvention, ModeTransform};
use bellsim_core::protocol::{run_chsh, run_sweep, ChshReport};
use bellsim_core::source::{two_mode_input, Blocked, SourceSpec};
use bellsim_core::validation::{run_validation, ValidationOptions};
use bellsim_core::Port;
use clap::{Args, Parser, Subcommand, ValueEnum};

/// Simulate a CHSH Bell test with two independent weak coherent sources.
#[derive(Parser)]
#[command(name = "bellsim", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the three-configuration protocol at four settings and compute S.
    Chsh {
        #[command(flatten)]
        run: RunArgs,
        /// Also write the unsubtracted count tables as CSV.
        #[arg(long, value_name = "PATH")]
        raw: Option<PathBuf>,
    },
    /// Correlation E(theta) with alpha = theta, beta = 0.
    Sweep {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long, requires_all = ["stop", "points"])]
        start: Option<f64>,
        #[arg(long)]
        stop: Option<f64>,
        #[arg(long)]
        points: Option<u32>,
    },
    /// Run the built-in validation battery.
    Validate {
        #[arg(long, value_enum, default_value_t = ConventionArg::Symmetric)]
        bs_convention: ConventionArg,
        /// Phase points used for the phase-average check.
        #[arg(long, default_value_t = 256)]
        phase_points: u32,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Print a state of the pipeline as JSON.
    DumpState {
        #[command(flatten)]
        source: SourceArgs,
        #[arg(long, value_enum, default_value_t = Stage::Source)]
        stage: Stage,
        #[arg(long, default_value_t = 0.0)]
        alpha: f64,
        #[arg(long, default_value_t = 0.0)]
        beta: f64,
    },
    /// Print a mode transform as JSON.
    DumpTransform {
        #[arg(long, value_enum, default_value_t = Element::Pipeline)]
        element: Element,
        #[arg(long, default_value_t = 0.0)]
        alpha: f64,
        #[arg(long, default_value_t = 0.0)]
        beta: f64,
        /// Angle for rotator, phase and beam-splitter elements.
        #[arg(long, default_value_t = PI / 4.0)]
        angle: f64,
        #[arg(long, value_enum, default_value_t = PortArg::A)]
        port: PortArg,
    },
}

#[derive(Args)]
struct RunArgs {
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_enum)]
    mode: Option<ModeArg>,
    #[arg(long)]
    trials: Option<u64>,
    #[arg(long)]
    repetitions: Option<u32>,
    /// Sets both mean photon numbers.
    #[arg(long)]
    mu: Option<f64>,
    #[arg(long)]
    visibility: Option<f64>,
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<FormatArg>,
}

#[derive(Args)]
struct SourceArgs {
    #[arg(long, default_value_t = 0.05)]
    mu_a: f64,
    #[arg(long, default_value_t = 0.05)]
    mu_b: f64,
    #[arg(long, default_value_t = 4)]
    n_max: u32,
    #[arg(long, value_enum, default_value_t = BlockedArg::None)]
    blocked: BlockedArg,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Exact,
    McFock,
    McCoherent,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Csv,
    Json,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ConventionArg {
    Symmetric,
    NoCrossPhase,
}

#[derive(Clone, Copy, ValueEnum)]
enum BlockedArg {
    None,
    BlockA,
    BlockB,
}

#[derive(Clone, Copy, ValueEnum)]
enum Stage {
    /// Truncated two-arm source mixture.
    Source,
    /// After the recombining beam splitter.
    Output,
    /// After beam splitter and analyzers.
    Analyzed,
}

#[derive(Clone, Copy, ValueEnum)]
enum Element {
    BeamSplitter,
    Analyzer,
    Pipeline,
    Rotator,
    Phase,
}

#[derive(Clone, Copy, ValueEnum)]
enum PortArg {
    A,
    B,
    C,
    D,
}

impl From<ModeArg> for Mode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Exact => Mode::Exact,
            ModeArg::McFock => Mode::McFock,
            ModeArg::McCoherent => Mode::McCoherent,
        }
    }
}

impl From<FormatArg> for OutputFormat {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Csv => OutputFormat::Csv,
            FormatArg::Json => OutputFormat::Json,
        }
    }
}

impl From<PortArg> for Port {
    fn from(p: PortArg) -> Self {
        match p {
            PortArg::A => Port::A,
            PortArg::B => Port::B,
            PortArg::C => Port::C,
            PortArg::D => Port::D,
        }
    }
}

impl From<BlockedArg> for Blocked {
    fn from(b: BlockedArg) -> Self {
        match b {
            BlockedArg::None => Blocked::None,
            BlockedArg::BlockA => Blocked::BlockA,
            BlockedArg::BlockB => Blocked::BlockB,
        }
    }
}

impl RunArgs {
    /// Reads the config file (or defaults) and applies command-line overrides.
    fn load(&self, default_angles: Angles) -> Result<ExperimentConfig> {
        let mut config = match &self.config {
            Some(path) => {
                let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
                serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?
            }
            None => ExperimentConfig {
                angles: default_angles,
                ..ExperimentConfig::default()
            },
        };
        if let Some(seed) = self.seed {
            config.seed = Some(seed);
        }
        if let Some(mode) = self.mode {
            config.mode = mode.into();
        }
        if let Some(trials) = self.trials {
            config.trials = trials;
        }
        if let Some(k) = self.repetitions {
            config.repetitions = k;
        }
        if let Some(mu) = self.mu {
            config.source.mu_a = mu;
            config.source.mu_b = mu;
        }
        if let Some(v) = self.visibility {
            config.detector.visibility = v;
        }
        if let Some(out) = &self.out {
            config.output.path = Some(out.clone());
        }
        if let Some(f) = self.format {
            config.output.format = Some(f.into());
        }
        config.validate()?;
        Ok(config)
    }
}

/// Writes `text` to `path`, or to stdout when no path is set.
fn emit(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            let mut stdout = std::io::stdout().lock();
            match stdout.write_all(text.as_bytes()).and_then(|()| stdout.flush()) {
                Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => Ok(()),
                r => r.context("writing to stdout"),
            }
        }
    }
}

fn chsh_csv(report: &ChshReport, config: &ExperimentConfig) -> Result<String> {
    let mut out = String::from("setting_alpha,setting_beta,e_value,e_error\n");
    for (s, (e, err)) in config
        .quad()?
        .settings()
        .iter()
        .zip(report.result.e_values.iter().zip(&report.result.e_errors))
    {
        writeln!(out, "{},{},{},{}", s.alpha, s.beta, e, err)?;
    }
    Ok(out)
}

fn raw_csv(report: &ChshReport) -> String {
    let mut out = format!("repetition,{}\n", CountTable::CSV_HEADER);
    for (rep, quad) in report.tables.iter().enumerate() {
        for tables in quad {
            for t in tables.tables() {
                out.push_str(&format!("{rep},{}\n", t.csv_row()));
            }
        }
    }
    out
}

fn cmd_chsh(run: &RunArgs, raw: Option<&Path>) -> Result<()> {
    let config = run.load(Angles::default())?;
    let report = run_chsh(&config)?;
    let r = &report.result;
    eprintln!(
        "mode {}, {} repetition(s): S = {:.6} +/- {:.6} (raw S = {:.6}); local bound {}",
        config.mode,
        report.repetitions,
        r.s_value,
        r.s_error,
        report.raw_result.s_value,
        if r.violates_local_bound() { "violated" } else { "not violated" }
    );
    if report.clamped > 0 {
        eprintln!("{} subtracted entries clamped at zero", report.clamped);
    }
    let text = match config.output.format.unwrap_or(OutputFormat::Json) {
        OutputFormat::Json => serde_json::to_string_pretty(r)? + "\n",
        OutputFormat::Csv => chsh_csv(&report, &config)?,
    };
    emit(config.output.path.as_deref(), &text)?;
    if let Some(path) = raw {
        fs::write(path, raw_csv(&report)).with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(())
}

fn sweep_json(points: &[SweepPoint]) -> Result<String> {
    let fit = fit_visibility(points).ok();
    let doc = serde_json::json!({
        "points": points,
        "eta": fit.map(|f| f.eta),
        "eta_err": fit.map(|f| f.std_error),
    });
    Ok(serde_json::to_string_pretty(&doc)? + "\n")
}

fn cmd_sweep(run: &RunArgs, start: Option<f64>, stop: Option<f64>, points: Option<u32>) -> Result<()> {
    let mut config = run.load(Angles::Sweep(SweepGrid::linspace(0.0, PI, 17)))?;
    if let (Some(start), Some(stop), Some(points)) = (start, stop, points) {
        config.angles = Angles::Sweep(SweepGrid::linspace(start, stop, points));
        config.validate()?;
    }
    let series = run_sweep(&config)?;
    match fit_visibility(&series) {
        Ok(fit) => eprintln!("fitted visibility {:.6} +/- {:.6}", fit.eta, fit.std_error),
        Err(e) => eprintln!("no visibility fit: {e}"),
    }
    let text = match config.output.format.unwrap_or(OutputFormat::Csv) {
        OutputFormat::Csv => {
            let mut out = format!("{}\n", SweepPoint::CSV_HEADER);
            for p in &series {
                out.push_str(&p.csv_row());
                out.push('\n');
            }
            out
        }
        OutputFormat::Json => sweep_json(&series)?,
    };
    emit(config.output.path.as_deref(), &text)
}

fn cmd_validate(convention: ConventionArg, phase_points: u32, seed: u64) -> Result<()> {
    let options = ValidationOptions {
        convention: match convention {
            ConventionArg::Symmetric => BsConvention::Symmetric,
            ConventionArg::NoCrossPhase => BsConvention::NoCrossPhase,
        },
        phase_points,
        seed,
    };
    let checks = run_validation(&options)?;
    let mut failed = 0;
    for c in &checks {
        println!(
            "{} {:<40} residual {:.3e} (tolerance {:.0e})",
            if c.passed { "PASS" } else { "FAIL" },
            c.name,
            c.residual,
            c.tolerance
        );
        failed += usize::from(!c.passed);
    }
    if failed > 0 {
        bail!("{failed} of {} validation checks failed", checks.len());
    }
    Ok(())
}

fn cmd_dump_state(source: &SourceArgs, stage: Stage, alpha: f64, beta: f64) -> Result<()> {
    let spec = SourceSpec::new(source.mu_a, source.mu_b)?
        .with_n_max(source.n_max)
        .with_blocked(source.blocked.into());
    let input = two_mode_input(&spec)?;
    if input.discarded_weight > 0.0 {
        eprintln!("truncation at n_max = {} discarded weight {:.3e}", spec.n_max, input.discarded_weight);
    }
    let mixture: DensityMixture = match stage {
        Stage::Source => input.mixture,
        Stage::Output => ModeTransform::secondary_beam_splitter().apply_mixture(&input.mixture)?,
        Stage::Analyzed => pipeline_transform(&AnalyzerSetting::new(alpha, beta)).apply_mixture(&input.mixture)?,
    };
    emit(None, &(serde_json::to_string_pretty(&mixture)? + "\n"))
}

fn cmd_dump_transform(element: Element, alpha: f64, beta: f64, angle: f64, port: Port) -> Result<()> {
    let setting = AnalyzerSetting::new(alpha, beta);
    let t = match element {
        Element::BeamSplitter => ModeTransform::beam_splitter((Port::A, Port::B), (Port::C, Port::D), angle)?,
        Element::Analyzer => analyzer_transform(&setting),
        Element::Pipeline => pipeline_transform(&setting),
        Element::Rotator => ModeTransform::polarization_rotator(port, angle),
        Element::Phase => ModeTransform::phase_shift(port, angle),
    };
    emit(None, &(serde_json::to_string_pretty(&t)? + "\n"))
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Chsh { run, raw } => cmd_chsh(&run, raw.as_deref()),
        Command::Sweep {
            run,
            start,
            stop,
            points,
        } => cmd_sweep(&run, start, stop, points),
        Command::Validate {
            bs_convention,
            phase_points,
            seed,
        } => cmd_validate(bs_convention, phase_points, seed),
        Command::DumpState {
            source,
            stage,
            alpha,
            beta,
        } => cmd_dump_state(&source, stage, alpha, beta),
        Command::DumpTransform {
            element,
            alpha,
            beta,
            angle,
            port,
        } => cmd_dump_transform(element, alpha, beta, angle, port.into()),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            log::debug!("{e:?}");
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
