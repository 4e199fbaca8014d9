//! Subcommands of the `dpsketch` binary.
//!
//! Every command is a plain function from parsed arguments to a
//! [`CommandOutput`], so tests drive them without spawning processes. Outputs
//! are pure functions of the arguments; timing goes to the diagnostics
//! channel, never into CSV or JSON.

use std::fs::File;
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use thiserror::Error;

use dpsketch::adversary::{play_game, F2ProbeAttack, GameConfig, ReplayAdversary, StreamingAlgorithm};
use dpsketch::dp::{DpError, NoiseSource, PrivacyParams};
use dpsketch::grid::EstimateGrid;
use dpsketch::robust::{
    bound_exponent, epsilon0, lambda_bound, privacy_accounting, required_k, FlipModel, RobustConfig, RobustError,
    RobustSketch, DEFAULT_LAMBDA_CONSTANT,
};
use dpsketch::sketches::hash::derive_seed;
use dpsketch::sketches::stream_file::{read_stream, StreamFormatError};
use dpsketch::sketches::{
    flip_points, stream_tau, AmsF2Sketch, AmsParams, ExactParams, ExactSketch, Functionality, GValueTrace, KmvParams,
    KmvSketch, ObliviousSketch, SketchError, StreamModel, StreamUpdate, Tau,
};
use dpsketch::GameTranscript;

pub const EXIT_FORMAT: u8 = 2;
pub const EXIT_MODEL: u8 = 3;
pub const EXIT_BUDGET: u8 = 4;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}: {source}")]
    Format { path: String, source: StreamFormatError },
    #[error("model violation: {0}")]
    Model(String),
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error(transparent)]
    Robust(#[from] RobustError),
    #[error(transparent)]
    Sketch(#[from] SketchError),
    #[error(transparent)]
    Dp(#[from] DpError),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Format { .. } => EXIT_FORMAT,
            CliError::Model(_) => EXIT_MODEL,
            _ => 1,
        }
    }
}

/// What a command prints and how the process should exit.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CommandOutput {
    pub stdout: String,
    /// Human-oriented notes for stderr (chosen sizes, wall time).
    pub diagnostics: Vec<String>,
    pub exit_code: u8,
}

impl CommandOutput {
    fn ok(stdout: String, diagnostics: Vec<String>) -> Self {
        Self { stdout, diagnostics, exit_code: 0 }
    }
}

#[derive(Debug, Parser)]
#[command(name = "dpsketch", version, about = "Robust streaming estimation with private aggregation of sketch copies")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run a stream file through an estimator and write a per-step CSV.
    Run(RunArgs),
    /// Play the adaptive F2 probe attack against AMS or the robust wrapper.
    Attack(AttackArgs),
    /// Print the sizing table (epsilon0, lambda, k, grid size, composed privacy).
    Params(ParamsArgs),
    /// Flip number of the exact value trace of a stream file.
    Flipnum(FlipnumArgs),
}

/// `auto` or an explicit count.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Sizing {
    #[default]
    Auto,
    Fixed(u64),
}

impl FromStr for Sizing {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        if s.eq_ignore_ascii_case("auto") {
            return Ok(Sizing::Auto);
        }
        match s.parse::<u64>() {
            Ok(0) => Err("must be at least 1".into()),
            Ok(v) => Ok(Sizing::Fixed(v)),
            Err(_) => Err(format!("expected `auto` or a positive integer, found `{s}`")),
        }
    }
}

impl Serialize for Sizing {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            Sizing::Auto => s.serialize_str("auto"),
            Sizing::Fixed(v) => s.serialize_u64(*v),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum FunctionalityArg {
    F2,
    Distinct,
}

impl From<FunctionalityArg> for Functionality {
    fn from(f: FunctionalityArg) -> Self {
        match f {
            FunctionalityArg::F2 => Functionality::F2,
            FunctionalityArg::Distinct => Functionality::Distinct,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// Exact frequencies; every step is within alpha.
    Exact,
    /// A single seeded sketch.
    Oblivious,
    /// The private-aggregation wrapper over k sketch copies.
    Robust,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelArg {
    InsertionOnly,
    Turnstile,
    TauBounded,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SizingArgs {
    /// Target accuracy alpha.
    #[arg(long, default_value_t = 0.3)]
    pub alpha: f64,
    /// Privacy parameter epsilon of the robust wrapper.
    #[arg(long, default_value_t = 1.0)]
    pub eps: f64,
    /// Privacy parameter delta of the robust wrapper.
    #[arg(long, default_value_t = 0.05)]
    pub delta: f64,
    /// Refresh budget: `auto` or a count.
    #[arg(long, default_value = "auto")]
    pub lambda: Sizing,
    /// Number of sketch copies: `auto` or a count.
    #[arg(long, default_value = "auto")]
    pub k: Sizing,
    /// Constant C in the copy-count formula.
    #[arg(long, default_value_t = 0.25)]
    pub sizing_constant: f64,
    /// Accuracy each sketch copy is built for; defaults to alpha.
    #[arg(long)]
    pub sketch_accuracy: Option<f64>,
}

impl SizingArgs {
    fn sketch_accuracy(&self) -> f64 {
        self.sketch_accuracy.unwrap_or(self.alpha)
    }
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    /// Stream file with one `item,weight` pair per line.
    #[arg(long)]
    pub stream: PathBuf,
    #[arg(long, value_enum, default_value_t = FunctionalityArg::F2)]
    pub functionality: FunctionalityArg,
    #[arg(long, value_enum, default_value_t = Mode::Robust)]
    pub mode: Mode,
    #[command(flatten)]
    pub sizing: SizingArgs,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Declared stream model; the file is rejected if it breaks it.
    #[arg(long, value_enum, default_value_t = ModelArg::InsertionOnly)]
    pub model: ModelArg,
    /// Deletion bound for `--model tau-bounded`.
    #[arg(long)]
    pub tau: Option<f64>,
    /// Domain size; defaults to the largest item in the file.
    #[arg(long)]
    pub n: Option<u64>,
    /// Horizon used for sizing; defaults to the number of updates.
    #[arg(long)]
    pub m: Option<u64>,
    /// Per-step CSV destination.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Target {
    Ams,
    Robust,
}

#[derive(Debug, Clone, Args)]
pub struct AttackArgs {
    #[arg(long, value_enum)]
    pub target: Target,
    #[arg(long, default_value_t = 1000)]
    pub n: u64,
    #[arg(long, default_value_t = 10_000)]
    pub m: usize,
    #[command(flatten)]
    pub sizing: SizingArgs,
    #[arg(long, default_value_t = 100)]
    pub trials: u64,
    /// Trial `t` uses seed `seed + t` for both the sketch and the attack.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Distinct items inserted before probing starts.
    #[arg(long, default_value_t = 50)]
    pub probe_batch: usize,
    /// Write the JSON here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct ParamsArgs {
    #[arg(long, default_value_t = 0.3)]
    pub alpha: f64,
    /// One table row per value.
    #[arg(long, value_delimiter = ',', default_value = "0.01,0.1,1")]
    pub eps: Vec<f64>,
    #[arg(long, default_value_t = 0.05)]
    pub delta: f64,
    #[arg(long, default_value_t = 10_000)]
    pub m: u64,
    #[arg(long, default_value_t = 1000)]
    pub n: u64,
    #[arg(long, value_enum, default_value_t = ModelArg::InsertionOnly)]
    pub model: ModelArg,
    #[arg(long)]
    pub tau: Option<f64>,
    #[arg(long, default_value = "auto")]
    pub lambda: Sizing,
    #[arg(long, default_value_t = 0.25)]
    pub sizing_constant: f64,
    /// Accepted for a uniform flag set; the table is deterministic.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct FlipnumArgs {
    #[arg(long)]
    pub stream: PathBuf,
    #[arg(long, value_enum, default_value_t = FunctionalityArg::F2)]
    pub functionality: FunctionalityArg,
    #[arg(long, default_value_t = 0.1)]
    pub alpha: f64,
    #[arg(long)]
    pub n: Option<u64>,
    /// Accepted for a uniform flag set; the result is deterministic.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

pub fn execute(command: &Command) -> Result<CommandOutput, CliError> {
    match command {
        Command::Run(args) => cmd_run(args),
        Command::Attack(args) => cmd_attack(args),
        Command::Params(args) => cmd_params(args),
        Command::Flipnum(args) => cmd_flipnum(args),
    }
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut text = serde_json::to_string_pretty(value).expect("report is serializable");
    text.push('\n');
    text
}

fn load_stream(path: &Path) -> Result<Vec<StreamUpdate>, CliError> {
    let file = File::open(path)?;
    read_stream(BufReader::new(file)).map_err(|source| match source {
        StreamFormatError::Io(e) => CliError::Io(e),
        source => CliError::Format { path: path.display().to_string(), source },
    })
}

fn stream_model(model: ModelArg, tau: Option<f64>) -> Result<StreamModel, CliError> {
    Ok(match model {
        ModelArg::InsertionOnly => StreamModel::InsertionOnly,
        ModelArg::Turnstile => StreamModel::Turnstile,
        ModelArg::TauBounded => {
            StreamModel::TauBounded(tau.ok_or_else(|| CliError::Usage("--model tau-bounded needs --tau".into()))?)
        }
    })
}

fn flip_model(model: StreamModel) -> Option<FlipModel<f64>> {
    match model {
        StreamModel::InsertionOnly => Some(FlipModel::InsertionOnly),
        StreamModel::TauBounded(tau) => Some(FlipModel::TauBounded(tau)),
        StreamModel::Turnstile | StreamModel::UnitTurnstile => None,
    }
}

/// Resolves `auto` sizes: lambda from the flip-number bound of the model at
/// `alpha / 10`, then k from the copy-count formula.
pub fn robust_config(sizing: &SizingArgs, model: StreamModel, m: u64, n: u64) -> Result<RobustConfig<f64>, CliError> {
    let privacy = PrivacyParams::new(sizing.eps, sizing.delta)?;
    let lambda = match sizing.lambda {
        Sizing::Fixed(l) => l,
        Sizing::Auto => {
            let flip = flip_model(model).ok_or_else(|| {
                CliError::Usage(format!("--lambda auto has no flip-number bound for the {model} model; pass a count"))
            })?;
            lambda_bound(flip, sizing.alpha / 10.0, m.max(1) as f64, DEFAULT_LAMBDA_CONSTANT)?
        }
    };
    let k = match sizing.k {
        Sizing::Fixed(k) => k as usize,
        Sizing::Auto => required_k(sizing.eps, sizing.delta, lambda, m.max(1) as f64, sizing.alpha, sizing.sizing_constant)?,
    };
    let config = RobustConfig {
        alpha: sizing.alpha,
        privacy,
        lambda,
        k,
        m: m.max(1),
        n: n.max(1),
        c: bound_exponent(m, n),
        sizing_constant: sizing.sizing_constant,
        signed: false,
    };
    config.validate()?;
    Ok(config)
}

/// Seed of the noise stream of a robust run, kept apart from the copy seeds.
pub fn noise_seed(seed: u64) -> u64 {
    derive_seed(!seed, u64::MAX)
}

fn sizing_note(config: &RobustConfig<f64>) -> String {
    format!("robust sizing: lambda = {}, k = {}", config.lambda, config.k)
}

struct RobustRun {
    transcript: GameTranscript,
    recomputations: u64,
    remaining_budget: u64,
}

fn play_robust<S>(config: RobustConfig<f64>, params: &S::Params, seed: u64, updates: Vec<StreamUpdate>, game: GameConfig) -> Result<RobustRun, CliError>
where
    S: ObliviousSketch<Scalar = f64>,
{
    let mut robust = RobustSketch::<S>::new(config, params, seed, NoiseSource::seeded(noise_seed(seed)))?;
    let transcript = play_game(&mut robust, &mut ReplayAdversary::new(updates), game);
    Ok(RobustRun { transcript, recomputations: robust.recomputations(), remaining_budget: robust.remaining_budget() })
}

fn play_plain<A: StreamingAlgorithm<Scalar = f64>>(mut alg: A, updates: Vec<StreamUpdate>, game: GameConfig) -> GameTranscript {
    play_game(&mut alg, &mut ReplayAdversary::new(updates), game)
}

#[derive(Debug, Serialize)]
struct RunEcho<'a> {
    stream: String,
    functionality: FunctionalityArg,
    mode: Mode,
    model: ModelArg,
    tau: Option<f64>,
    seed: u64,
    n: u64,
    m: u64,
    #[serde(flatten)]
    sizing: &'a SizingArgs,
}

#[derive(Debug, Serialize)]
struct RunSummary {
    rounds: usize,
    steps_outside_alpha: usize,
    /// `null` when an estimate was non-zero while the exact value was 0.
    max_rel_error: f64,
    lambda: Option<u64>,
    k: Option<usize>,
    recomputations: Option<u64>,
    remaining_budget: Option<u64>,
    halted: bool,
}

#[derive(Debug, Serialize)]
struct RunReport<'a> {
    config: RunEcho<'a>,
    csv: String,
    summary: RunSummary,
}

fn write_steps(path: &Path, transcript: &GameTranscript) -> io::Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    writeln!(out, "i,estimate,exact,within_alpha")?;
    for r in &transcript.rounds {
        writeln!(out, "{},{},{},{}", r.i, r.output, r.exact, r.within_alpha)?;
    }
    out.flush()
}

fn check_stream(updates: &[StreamUpdate], model: StreamModel, n: u64) -> Result<(), CliError> {
    if let Some((index, u)) = updates.iter().enumerate().find(|(_, u)| u.item > n) {
        return Err(CliError::Model(format!("update {} has item {} outside [1, {n}]", index + 1, u.item)));
    }
    model.check(updates).map_err(|e| CliError::Model(e.to_string()))?;
    if let StreamModel::TauBounded(tau) = model {
        match stream_tau::<f64>(updates, n)? {
            Tau::Bounded(t) if t <= tau => {}
            Tau::Bounded(t) => return Err(CliError::Model(format!("stream needs tau = {t}, above the declared {tau}"))),
            Tau::Unbounded => return Err(CliError::Model("stream is not tau-bounded for any tau".into())),
        }
    }
    Ok(())
}

pub fn cmd_run(args: &RunArgs) -> Result<CommandOutput, CliError> {
    let started = Instant::now();
    let updates = load_stream(&args.stream)?;
    let model = stream_model(args.model, args.tau)?;
    let n = args.n.unwrap_or_else(|| updates.iter().map(|u| u.item).max().unwrap_or(1));
    let m = args.m.unwrap_or(updates.len() as u64).max(1);
    check_stream(&updates, model, n)?;

    let functionality = Functionality::from(args.functionality);
    let game = GameConfig { m: updates.len(), n, functionality, alpha: args.sizing.alpha };
    let accuracy = args.sizing.sketch_accuracy();
    let mut diagnostics = Vec::new();
    let mut summary =
        RunSummary { rounds: 0, steps_outside_alpha: 0, max_rel_error: 0.0, lambda: None, k: None, recomputations: None, remaining_budget: None, halted: false };

    let transcript = match args.mode {
        Mode::Exact => play_plain(ExactSketch::<f64>::init(args.seed, &ExactParams { functionality, domain: n }), updates, game),
        Mode::Oblivious => match functionality {
            Functionality::F2 => play_plain(AmsF2Sketch::<f64>::init(args.seed, &AmsParams::for_accuracy(accuracy, n, m)?), updates, game),
            Functionality::Distinct => play_plain(KmvSketch::<f64>::init(args.seed, &KmvParams::for_accuracy(accuracy, n)?), updates, game),
        },
        Mode::Robust => {
            let config = robust_config(&args.sizing, model, m, n)?;
            diagnostics.push(sizing_note(&config));
            summary.lambda = Some(config.lambda);
            summary.k = Some(config.k);
            let run = match functionality {
                Functionality::F2 => play_robust::<AmsF2Sketch<f64>>(config, &AmsParams::for_accuracy(accuracy, n, m)?, args.seed, updates, game)?,
                Functionality::Distinct => play_robust::<KmvSketch<f64>>(config, &KmvParams::for_accuracy(accuracy, n)?, args.seed, updates, game)?,
            };
            summary.recomputations = Some(run.recomputations);
            summary.remaining_budget = Some(run.remaining_budget);
            run.transcript
        }
    };
    if let Some(halt) = &transcript.halt {
        diagnostics.push(format!("estimator halted after {} rounds: {halt:?}", transcript.rounds.len()));
    }
    summary.rounds = transcript.rounds.len();
    summary.steps_outside_alpha = transcript.rounds.iter().filter(|r| !r.within_alpha).count();
    summary.max_rel_error = transcript.max_relative_error();
    summary.halted = transcript.halt.is_some();
    write_steps(&args.out, &transcript)?;

    let report = RunReport {
        config: RunEcho {
            stream: args.stream.display().to_string(),
            functionality: args.functionality,
            mode: args.mode,
            model: args.model,
            tau: args.tau,
            seed: args.seed,
            n,
            m,
            sizing: &args.sizing,
        },
        csv: args.out.display().to_string(),
        summary,
    };
    diagnostics.push(format!("wall time: {:.3}s", started.elapsed().as_secs_f64()));
    let exit_code = if report.summary.halted { EXIT_BUDGET } else { 0 };
    Ok(CommandOutput { stdout: to_json(&report), diagnostics, exit_code })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialRecord {
    pub seed: u64,
    pub failure_round: Option<usize>,
    pub max_rel_error: f64,
    pub final_rel_error: Option<f64>,
    pub rounds: usize,
    pub halted: bool,
    pub recomputations: Option<u64>,
    pub lambda: Option<u64>,
}

impl TrialRecord {
    /// Some published estimate missed the alpha band, or the estimator stopped
    /// answering before the horizon.
    pub fn failed(&self) -> bool {
        self.failure_round.is_some() || self.halted
    }
}

#[derive(Debug, Serialize)]
struct AttackEcho<'a> {
    target: Target,
    n: u64,
    m: usize,
    trials: u64,
    seed: u64,
    probe_batch: usize,
    lambda_resolved: Option<u64>,
    k_resolved: Option<usize>,
    #[serde(flatten)]
    sizing: &'a SizingArgs,
}

#[derive(Debug, Serialize)]
struct AttackReport<'a> {
    config: AttackEcho<'a>,
    trials: Vec<TrialRecord>,
    failure_rate: Option<f64>,
    median_worst_error: Option<f64>,
}

fn record(seed: u64, t: &GameTranscript, recomputations: Option<u64>, lambda: Option<u64>) -> TrialRecord {
    TrialRecord {
        seed,
        failure_round: t.failure_round(),
        max_rel_error: t.max_relative_error(),
        final_rel_error: t.final_relative_error(),
        rounds: t.rounds.len(),
        halted: t.halt.is_some(),
        recomputations,
        lambda,
    }
}

/// One attack game with the sketch and the attack both seeded by `seed`.
pub fn attack_trial(args: &AttackArgs, seed: u64) -> Result<(TrialRecord, GameTranscript), CliError> {
    let game = GameConfig { m: args.m, n: args.n, functionality: Functionality::F2, alpha: args.sizing.alpha };
    let params = AmsParams::for_accuracy(args.sizing.sketch_accuracy(), args.n, args.m as u64)?;
    let mut adversary = F2ProbeAttack::new(args.n, args.m, args.probe_batch, seed);
    Ok(match args.target {
        Target::Ams => {
            let mut sketch = AmsF2Sketch::<f64>::init(seed, &params);
            let t = play_game(&mut sketch, &mut adversary, game);
            (record(seed, &t, None, None), t)
        }
        Target::Robust => {
            let config = robust_config(&args.sizing, StreamModel::InsertionOnly, args.m as u64, args.n)?;
            let lambda = config.lambda;
            let mut robust = RobustSketch::<AmsF2Sketch<f64>>::new(config, &params, seed, NoiseSource::seeded(noise_seed(seed)))?;
            let t = play_game(&mut robust, &mut adversary, game);
            (record(seed, &t, Some(robust.recomputations()), Some(lambda)), t)
        }
    })
}

fn median(mut values: Vec<f64>) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    values.sort_by(f64::total_cmp);
    let mid = values.len() / 2;
    Some(if values.len() % 2 == 1 { values[mid] } else { (values[mid - 1] + values[mid]) / 2.0 })
}

pub fn cmd_attack(args: &AttackArgs) -> Result<CommandOutput, CliError> {
    let started = Instant::now();
    let mut diagnostics = Vec::new();
    let (lambda_resolved, k_resolved) = match args.target {
        Target::Ams => (None, None),
        Target::Robust => {
            let config = robust_config(&args.sizing, StreamModel::InsertionOnly, args.m as u64, args.n)?;
            diagnostics.push(sizing_note(&config));
            (Some(config.lambda), Some(config.k))
        }
    };
    let trials = (0..args.trials)
        .map(|t| attack_trial(args, args.seed.wrapping_add(t)).map(|(r, _)| r))
        .collect::<Result<Vec<_>, _>>()?;
    let failure_rate = (!trials.is_empty()).then(|| trials.iter().filter(|r| r.failed()).count() as f64 / trials.len() as f64);
    let report = AttackReport {
        config: AttackEcho {
            target: args.target,
            n: args.n,
            m: args.m,
            trials: args.trials,
            seed: args.seed,
            probe_batch: args.probe_batch,
            lambda_resolved,
            k_resolved,
            sizing: &args.sizing,
        },
        median_worst_error: median(trials.iter().map(|r| r.max_rel_error).collect()),
        failure_rate,
        trials,
    };
    diagnostics.push(format!("wall time: {:.3}s", started.elapsed().as_secs_f64()));
    let text = to_json(&report);
    match &args.out {
        Some(path) => {
            std::fs::write(path, text)?;
            Ok(CommandOutput::ok(String::new(), diagnostics))
        }
        None => Ok(CommandOutput::ok(text, diagnostics)),
    }
}

/// One row of the sizing table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ParamsRow {
    pub epsilon: f64,
    pub delta: f64,
    pub alpha: f64,
    pub m: u64,
    pub lambda: u64,
    pub k: usize,
    pub epsilon0: f64,
    pub grid_size: usize,
    pub composed_epsilon: f64,
    pub composed_delta: f64,
}

pub const PARAMS_HEADER: &str = "epsilon,delta,alpha,m,lambda,k,epsilon0,grid_size,composed_epsilon,composed_delta";

pub fn params_rows(args: &ParamsArgs) -> Result<Vec<ParamsRow>, CliError> {
    let model = stream_model(args.model, args.tau)?;
    let grid = EstimateGrid::<f64>::geometric(args.alpha, args.n, bound_exponent(args.m, args.n), false)
        .map_err(RobustError::from)?;
    args.eps
        .iter()
        .map(|&eps| {
            let sizing = SizingArgs {
                alpha: args.alpha,
                eps,
                delta: args.delta,
                lambda: args.lambda,
                k: Sizing::Auto,
                sizing_constant: args.sizing_constant,
                sketch_accuracy: None,
            };
            let config = robust_config(&sizing, model, args.m, args.n)?;
            let composed = privacy_accounting(&config)?;
            Ok(ParamsRow {
                epsilon: eps,
                delta: args.delta,
                alpha: args.alpha,
                m: args.m,
                lambda: config.lambda,
                k: config.k,
                epsilon0: epsilon0(eps, config.lambda, args.delta)?,
                grid_size: grid.len(),
                composed_epsilon: composed.epsilon,
                composed_delta: composed.delta,
            })
        })
        .collect()
}

pub fn cmd_params(args: &ParamsArgs) -> Result<CommandOutput, CliError> {
    let mut text = format!("{PARAMS_HEADER}\n");
    for r in params_rows(args)? {
        text.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{}\n",
            r.epsilon, r.delta, r.alpha, r.m, r.lambda, r.k, r.epsilon0, r.grid_size, r.composed_epsilon, r.composed_delta
        ));
    }
    match &args.out {
        Some(path) => {
            std::fs::write(path, text)?;
            Ok(CommandOutput::ok(String::new(), Vec::new()))
        }
        None => Ok(CommandOutput::ok(text, Vec::new())),
    }
}

#[derive(Debug, Serialize)]
struct FlipReport {
    functionality: FunctionalityArg,
    alpha: f64,
    rounds: usize,
    flip_number: usize,
    /// 1-based rounds at which the counted changes happen.
    flips: Vec<usize>,
}

pub fn cmd_flipnum(args: &FlipnumArgs) -> Result<CommandOutput, CliError> {
    let updates = load_stream(&args.stream)?;
    let n = args.n.unwrap_or_else(|| updates.iter().map(|u| u.item).max().unwrap_or(1));
    let trace = GValueTrace::<f64>::from_stream(&updates, args.functionality.into(), n)
        .map_err(|e| CliError::Model(e.to_string()))?;
    let flips: Vec<usize> = flip_points(trace.values(), args.alpha).into_iter().map(|i| i + 1).collect();
    let report = FlipReport { functionality: args.functionality, alpha: args.alpha, rounds: trace.len(), flip_number: flips.len(), flips };
    Ok(CommandOutput::ok(to_json(&report), Vec::new()))
}
