//! Subcommands of the `hbni` tool. Each one is an ordinary function taking
//! its parsed arguments plus stdout/stderr sinks, so tests can drive it
//! in-process.

use std::collections::HashSet;
use std::fmt;
use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use hbni::baselines::{BaselineState, Method};
use hbni::experiment::{run_comparison, CompareConfig};
use hbni::filter::{sliding_window_classify, FilterState};
use hbni::io::{
    model_from_json, model_to_json, read_observations, write_observations, write_posterior_line, LabelFile,
    PosteriorRecord, SCHEMA_VERSION,
};
use hbni::sampler::{run_chain, AcceptanceRates, ChainConfig, NoiseModel, TraceSummary};
use hbni::synth::{generate_scenario, ScenarioSpec};
use hbni::types::argmax_lowest;
use hbni::{ClassLabel, ClassPrior, ProbVec, RngSeed};

#[derive(Debug, Parser)]
#[command(
    name = "hbni",
    version,
    about = "Infer classifier noise from unlabeled outputs and filter class streams"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic observation stream and its label sidecar.
    Simulate(SimulateArgs),
    /// Run the MCMC chain over an observation file and save the noise model.
    Infer(InferArgs),
    /// Emit one posterior per frame of an observation stream.
    Filter(FilterArgs),
    /// Compare HBNI with the consensus baselines over seeded trials.
    Compare(CompareArgs),
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Scenario file.
    #[arg(long)]
    pub config: PathBuf,
    /// Observation file to write; labels go to `<stem>.labels.json`.
    #[arg(long)]
    pub out: PathBuf,
    /// Overrides the scenario seed.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct InferArgs {
    #[arg(long)]
    pub obs: PathBuf,
    /// Chain settings and optional class prior; defaults when omitted.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    /// Overrides the chain seed.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    Hbni,
    Mom,
    Vote,
    Ssbf,
}

impl Mode {
    pub fn tag(self) -> &'static str {
        match self {
            Mode::Hbni => "hbni",
            Mode::Mom => Method::MaxOfMean.tag(),
            Mode::Vote => Method::Vote.tag(),
            Mode::Ssbf => Method::Ssbf.tag(),
        }
    }

    fn baseline(self) -> Option<Method> {
        match self {
            Mode::Hbni => None,
            Mode::Mom => Some(Method::MaxOfMean),
            Mode::Vote => Some(Method::Vote),
            Mode::Ssbf => Some(Method::Ssbf),
        }
    }
}

#[derive(Debug, Args)]
pub struct FilterArgs {
    #[arg(long)]
    pub obs: PathBuf,
    /// Noise model; required for hbni, supplies the class prior otherwise.
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "hbni")]
    pub mode: Mode,
    /// Classify from the last W frames only (hbni, median θ).
    #[arg(long)]
    pub window: Option<usize>,
    /// Write the stream here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    /// Scenario file; its plan generates the calibration set.
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long, default_value_t = 200)]
    pub trials: usize,
    /// Stream lengths, as `a..b` (inclusive) or a comma list.
    #[arg(long, default_value = "1..15", value_parser = parse_grid)]
    pub n_grid: std::vec::Vec<usize>,
    /// Full JSON report.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Record wall-clock phase timings in the report.
    #[arg(long)]
    pub timings: bool,
}

pub fn parse_grid(s: &str) -> Result<Vec<usize>, String> {
    let bad = |_| format!("invalid stream length list '{s}'");
    if let Some((a, b)) = s.split_once("..") {
        let a: usize = a.trim().parse().map_err(bad)?;
        let b: usize = b.trim().parse().map_err(bad)?;
        if a == 0 || b < a {
            return Err(format!("empty or zero-based range '{s}'"));
        }
        return Ok((a..=b).collect());
    }
    s.split(',').map(|v| v.trim().parse::<usize>().map_err(bad)).collect()
}

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Data(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Data(m) => f.write_str(m),
        }
    }
}

impl std::error::Error for CliError {}

type CliResult<T> = Result<T, CliError>;

fn usage(e: impl fmt::Display) -> CliError {
    CliError::Usage(e.to_string())
}

fn data(e: impl fmt::Display) -> CliError {
    CliError::Data(e.to_string())
}

// Config problems are the caller's fault; everything else is about the data.
fn classify(e: hbni::Error) -> CliError {
    match e {
        hbni::Error::Config(_) => usage(e),
        other => data(other),
    }
}

fn read_config<T: for<'de> Deserialize<'de>>(path: &Path) -> CliResult<T> {
    let text = fs::read_to_string(path).map_err(|e| usage(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| usage(format!("{}: {e}", path.display())))
}

fn load_observations(path: &Path) -> CliResult<Vec<(u64, ProbVec)>> {
    let file = File::open(path).map_err(|e| data(format!("{}: {e}", path.display())))?;
    read_observations(BufReader::new(file)).map_err(|e| data(format!("{}: {e}", path.display())))
}

fn create(path: &Path) -> CliResult<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| data(format!("{}: {e}", path.display())))
}

/// `obs.jsonl` → `obs.labels.json`
pub fn sidecar_path(out: &Path) -> PathBuf {
    out.with_extension("labels.json")
}

pub fn run(cli: Cli, stdout: &mut dyn Write, stderr: &mut dyn Write) -> CliResult<()> {
    match cli.command {
        Command::Simulate(a) => simulate(&a),
        Command::Infer(a) => infer(&a, stdout, stderr),
        Command::Filter(a) => filter(&a, stdout),
        Command::Compare(a) => compare(&a, stdout),
    }
}

pub fn simulate(args: &SimulateArgs) -> CliResult<()> {
    let mut spec: ScenarioSpec = read_config(&args.config)?;
    if let Some(seed) = args.seed {
        spec.seed = RngSeed(seed);
    }
    spec.validate().map_err(usage)?;
    let (obs, labels) = generate_scenario(&spec).map_err(usage)?;

    let mut w = create(&args.out)?;
    write_observations(&mut w, &obs).map_err(data)?;
    w.flush().map_err(data)?;

    let sidecar = sidecar_path(&args.out);
    let mut w = create(&sidecar)?;
    serde_json::to_writer(&mut w, &LabelFile::new(&labels)).map_err(data)?;
    w.write_all(b"\n").map_err(data)?;
    w.flush().map_err(data)
}

/// Contents of `infer --config`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InferConfig {
    #[serde(default = "schema_version")]
    pub version: u32,
    #[serde(default)]
    pub chain: ChainConfig,
    #[serde(default)]
    pub class_prior: Option<Vec<f64>>,
}

impl Default for InferConfig {
    fn default() -> Self {
        Self {
            version: SCHEMA_VERSION,
            chain: ChainConfig::default(),
            class_prior: None,
        }
    }
}

fn schema_version() -> u32 {
    SCHEMA_VERSION
}

#[derive(Debug, Serialize)]
struct InferSummary {
    version: u32,
    #[serde(rename = "M")]
    classes: usize,
    observations: usize,
    samples: usize,
    acceptance: AcceptanceRates,
    summaries: Vec<TraceSummary>,
}

pub fn infer(args: &InferArgs, stdout: &mut dyn Write, stderr: &mut dyn Write) -> CliResult<()> {
    let mut cfg = match &args.config {
        Some(p) => read_config::<InferConfig>(p)?,
        None => InferConfig::default(),
    };
    if cfg.version != SCHEMA_VERSION {
        return Err(usage(format!("unsupported config version {}", cfg.version)));
    }
    if let Some(seed) = args.seed {
        cfg.chain.seed = RngSeed(seed);
    }
    cfg.chain.validate().map_err(usage)?;

    let obs: Vec<ProbVec> = load_observations(&args.obs)?.into_iter().map(|(_, x)| x).collect();
    let Some(first) = obs.first() else {
        return Err(data(format!("{}: no observations", args.obs.display())));
    };
    let classes = first.len();
    let pi = match &cfg.class_prior {
        Some(p) => {
            let pi = ClassPrior::new(ProbVec::from_io(p).map_err(usage)?);
            if pi.classes() != classes {
                return Err(usage(format!(
                    "class prior has {} entries but observations have {classes}",
                    pi.classes()
                )));
            }
            pi
        }
        None => ClassPrior::uniform(classes),
    };

    let distinct: HashSet<Vec<u64>> = obs
        .iter()
        .map(|x| x.as_slice().iter().map(|v| v.to_bits()).collect())
        .collect();
    if distinct.len() < classes {
        writeln!(
            stderr,
            "warning: only {} distinct observations for {classes} classes; the posterior will be prior-dominated",
            distinct.len()
        )
        .map_err(data)?;
    }

    let (model, diag) = run_chain(&obs, classes, &pi, &cfg.chain).map_err(classify)?;
    let json = model_to_json(&model, Some(&diag)).map_err(data)?;
    let mut w = create(&args.out)?;
    w.write_all(json.as_bytes()).map_err(data)?;
    w.write_all(b"\n").map_err(data)?;
    w.flush().map_err(data)?;

    let summary = InferSummary {
        version: SCHEMA_VERSION,
        classes,
        observations: obs.len(),
        samples: model.samples.len(),
        acceptance: diag.acceptance,
        summaries: diag.summaries,
    };
    serde_json::to_writer(&mut *stdout, &summary).map_err(data)?;
    stdout.write_all(b"\n").map_err(data)
}

fn load_model(path: &Path) -> CliResult<NoiseModel> {
    let text = fs::read_to_string(path).map_err(|e| data(format!("{}: {e}", path.display())))?;
    model_from_json(&text)
        .map(|(m, _)| m)
        .map_err(|e| data(format!("{}: {e}", path.display())))
}

/// Posterior and label for every frame under the requested mode.
pub fn filter_stream(
    stream: &[ProbVec],
    model: Option<&NoiseModel>,
    mode: Mode,
    window: Option<usize>,
) -> CliResult<Vec<(ProbVec, ClassLabel)>> {
    let Some(width) = stream.first().map(ProbVec::len) else {
        return Ok(Vec::new());
    };
    if let Some(m) = model {
        if m.classes != width {
            return Err(data(format!(
                "model has {} classes but observations have {width} entries",
                m.classes
            )));
        }
    }
    if window == Some(0) {
        return Err(usage("--window must be at least 1"));
    }

    if let Some(method) = mode.baseline() {
        if window.is_some() {
            return Err(usage("--window applies to hbni mode only"));
        }
        let pi = model.map_or_else(|| ClassPrior::uniform(width), |m| m.pi.clone());
        let mut state = BaselineState::new(method, &pi);
        return stream
            .iter()
            .map(|x| {
                state.update(x).map_err(data)?;
                Ok((state.posterior().map_err(data)?, state.label()))
            })
            .collect();
    }

    let model = model.ok_or_else(|| usage("hbni mode needs --model"))?;
    if let Some(w) = window {
        return sliding_window_classify(stream, w, model, &model.pi).map_err(data);
    }
    // Full history: average the per-sample posteriors.
    let mut states: Vec<FilterState> = model.samples.iter().map(|_| FilterState::new(&model.pi)).collect();
    let n = states.len() as f64;
    stream
        .iter()
        .map(|x| {
            let mut mean = vec![0.0; width];
            for (state, s) in states.iter_mut().zip(&model.samples) {
                state.update(x, &s.thetas).map_err(data)?;
                for (acc, v) in mean.iter_mut().zip(state.posterior().map_err(data)?.as_slice()) {
                    *acc += v / n;
                }
            }
            let label = ClassLabel::new(argmax_lowest(&mean), width).map_err(data)?;
            let post = ProbVec::validate(&mean, 1e-9).map_err(data)?;
            Ok((post, label))
        })
        .collect()
}

pub fn filter(args: &FilterArgs, stdout: &mut dyn Write) -> CliResult<()> {
    let records = load_observations(&args.obs)?;
    let model = args.model.as_deref().map(load_model).transpose()?;
    let stream: Vec<ProbVec> = records.iter().map(|(_, x)| x.clone()).collect();
    let out = filter_stream(&stream, model.as_ref(), args.mode, args.window)?;

    let mut file;
    let sink: &mut dyn Write = match &args.out {
        Some(p) => {
            file = create(p)?;
            &mut file
        }
        None => stdout,
    };
    for ((t, _), (post, label)) in records.iter().zip(&out) {
        write_posterior_line(&mut *sink, &PosteriorRecord::new(*t, post, *label, args.mode.tag())).map_err(data)?;
    }
    sink.flush().map_err(data)
}

pub fn compare(args: &CompareArgs, stdout: &mut dyn Write) -> CliResult<()> {
    let scenario: ScenarioSpec = read_config(&args.config)?;
    let cfg = CompareConfig {
        chain: ChainConfig::default().with_seed(scenario.seed.derive(1)),
        scenario,
        trials: args.trials,
        n_grid: args.n_grid.clone(),
        seed: RngSeed(args.seed),
    };
    let (mut report, _, _) = run_comparison(&cfg).map_err(classify)?;
    if !args.timings {
        report.timings = None;
    }
    if let Some(path) = &args.out {
        let mut w = create(path)?;
        serde_json::to_writer_pretty(&mut w, &report).map_err(data)?;
        w.write_all(b"\n").map_err(data)?;
        w.flush().map_err(data)?;
    }
    stdout.write_all(report.to_csv().as_bytes()).map_err(data)
}
