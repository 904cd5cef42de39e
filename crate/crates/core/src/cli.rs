//! Command-line front end: `fit`, `optimize`, `pipeline` and `gen`.
//!
//! Exit codes: 0 on success, 1 on data or runtime errors, 2 on usage errors
//! (bad flags, bad config files, unknown label column).

use std::ffi::OsString;
use std::fmt::Debug;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::data::{self, Bounds, DataError, Dataset, MissingPolicy, DEFAULT_LABEL_COLUMN};
use crate::logistic::{self, FitOptions, ModelFile};
use crate::pipeline::{self, PipelineConfig, PipelineError, PrescriptionReport};
use crate::{json, seeded_rng, DEFAULT_SEED};

/// Environment variable consulted for the seed when neither `--seed` nor the
/// config file sets one.
pub const SEED_ENV: &str = "RELIOPT_SEED";

#[derive(Debug, Parser)]
#[command(
    name = "reliopt",
    version,
    about = "Estimate and maximize bank reliability from financial ratios"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit the logistic reliability model on a labeled dataset and save it.
    Fit(FitArgs),
    /// Maximize a saved model's reliability over a box with a PSO ensemble.
    Optimize(OptimizeArgs),
    /// Fit and optimize in one go.
    Pipeline(PipelineArgs),
    /// Generate a synthetic labeled dataset.
    Gen(GenArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MissingArg {
    Mean,
    Reject,
}

impl From<MissingArg> for MissingPolicy {
    fn from(m: MissingArg) -> Self {
        match m {
            MissingArg::Mean => MissingPolicy::MeanImpute,
            MissingArg::Reject => MissingPolicy::RejectMissing,
        }
    }
}

#[derive(Debug, Clone, Default, Args)]
pub struct DataArgs {
    /// Input CSV (header row required; empty or NA marks a missing value).
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Name of the 0/1 label column (1 = healthy).
    #[arg(long)]
    pub label: Option<String>,
    /// Missing-value handling.
    #[arg(long, value_enum)]
    pub missing: Option<MissingArg>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct OutputArgs {
    /// Output file.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Print JSON to standard output instead of the text summary.
    #[arg(long)]
    pub json: bool,
    /// JSON config file; flags given on the command line take precedence.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct SwarmArgs {
    /// Base seed; run i uses seed + i. Falls back to the config file, then RELIOPT_SEED.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Particles per swarm.
    #[arg(long)]
    pub pop: Option<usize>,
    /// Update sweeps per run (after the initial evaluation).
    #[arg(long)]
    pub iters: Option<usize>,
    /// Independent runs in the ensemble.
    #[arg(long)]
    pub runs: Option<usize>,
    /// Cognitive coefficient.
    #[arg(long)]
    pub c1: Option<f64>,
    /// Social coefficient.
    #[arg(long)]
    pub c2: Option<f64>,
    /// Inertia on the first sweep.
    #[arg(long = "w-start")]
    pub w_start: Option<f64>,
    /// Inertia on the last sweep.
    #[arg(long = "w-end")]
    pub w_end: Option<f64>,
    /// Number of near-optimal prescriptions to report.
    #[arg(long)]
    pub prescriptions: Option<usize>,
    /// Distinctness radius in normalized box units.
    #[arg(long)]
    pub radius: Option<f64>,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct OptimizeArgs {
    /// Model JSON written by `fit`.
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// JSON file with `lower` and `upper` arrays, used instead of --data.
    #[arg(long)]
    pub bounds: Option<PathBuf>,
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub swarm: SwarmArgs,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct PipelineArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub swarm: SwarmArgs,
    #[command(flatten)]
    pub output: OutputArgs,
    /// Where to write the fitted model (default: next to --out as <stem>.model.json).
    #[arg(long = "model-out")]
    pub model_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct GenArgs {
    /// Number of ratio columns.
    #[arg(long)]
    pub features: usize,
    /// Number of banks.
    #[arg(long)]
    pub rows: usize,
    /// Falls back to RELIOPT_SEED, then the built-in default.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output CSV; standard output when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Name of the label column written last.
    #[arg(long, default_value = DEFAULT_LABEL_COLUMN)]
    pub label: String,
    /// Lower end of every feature range.
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub lower: f64,
    /// Upper end of every feature range.
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    pub upper: f64,
    /// Comma-separated coefficients `b0,b1,...,bn`; drawn from the seed when absent.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    pub beta: Option<Vec<f64>>,
    /// Print the true coefficients as JSON.
    #[arg(long)]
    pub json: bool,
}

/// Keys accepted in a `--config` file. Unknown keys are rejected.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CliConfigFile {
    pub data: Option<PathBuf>,
    pub label: Option<String>,
    pub missing: Option<MissingArg>,
    pub model: Option<PathBuf>,
    pub bounds: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub model_out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub pop: Option<usize>,
    pub iters: Option<usize>,
    pub runs: Option<usize>,
    pub c1: Option<f64>,
    pub c2: Option<f64>,
    pub w_start: Option<f64>,
    pub w_end: Option<f64>,
    pub velocity_clamp: Option<f64>,
    pub scalar_rand: Option<bool>,
    pub prescriptions: Option<usize>,
    pub radius: Option<f64>,
    pub fit: Option<FitOptions<f64>>,
}

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Runtime(_) => 1,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Usage(m) | CliError::Runtime(m) => m,
        }
    }
}

impl From<DataError> for CliError {
    fn from(e: DataError) -> Self {
        match e {
            DataError::UnknownLabelColumn(_) => CliError::Usage(e.to_string()),
            _ => CliError::Runtime(e.to_string()),
        }
    }
}

impl From<PipelineError> for CliError {
    fn from(e: PipelineError) -> Self {
        match e {
            PipelineError::Data(d) => d.into(),
            PipelineError::InvalidConfig(_) | PipelineError::Pso(crate::pso::PsoError::InvalidConfig(_)) => {
                CliError::Usage(e.to_string())
            }
            _ => CliError::Runtime(e.to_string()),
        }
    }
}

impl From<logistic::LogisticError> for CliError {
    fn from(e: logistic::LogisticError) -> Self {
        CliError::Runtime(e.to_string())
    }
}

type CliResult<T = ()> = Result<T, CliError>;

struct Io<'a> {
    out: &'a mut dyn Write,
    err: &'a mut dyn Write,
}

impl Io<'_> {
    fn print(&mut self, s: &str) -> CliResult {
        self.out
            .write_all(s.as_bytes())
            .map_err(|e| CliError::Runtime(format!("writing output: {e}")))
    }

    fn note(&mut self, s: &str) {
        let _ = writeln!(self.err, "{s}");
    }
}

/// Parse `args` (program name first) and run the command. Returns the exit
/// code; all output goes through `out` and `err`.
pub fn run<I, S>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = e.exit_code();
            let rendered = e.render().to_string();
            if code == 0 {
                let _ = out.write_all(rendered.as_bytes());
            } else {
                let _ = err.write_all(rendered.as_bytes());
            }
            return code;
        }
    };
    let mut io = Io { out, err };
    let result = match cli.command {
        Command::Fit(a) => cmd_fit(a, &mut io),
        Command::Optimize(a) => cmd_optimize(a, &mut io),
        Command::Pipeline(a) => cmd_pipeline(a, &mut io),
        Command::Gen(a) => cmd_gen(a, &mut io),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            io.note(&format!("error: {}", e.message()));
            e.exit_code()
        }
    }
}

fn load_config(path: Option<&Path>) -> CliResult<CliConfigFile> {
    let Some(path) = path else {
        return Ok(CliConfigFile::default());
    };
    let text =
        fs::read_to_string(path).map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("invalid config {}: {e}", path.display())))
}

/// Flag value if given, else the config value; a disagreement is noted.
fn pick<V: PartialEq + Debug>(io: &mut Io, name: &str, flag: Option<V>, config: Option<V>) -> Option<V> {
    match (flag, config) {
        (Some(f), Some(c)) => {
            if f != c {
                io.note(&format!("note: --{name} {f:?} overrides config value {c:?}"));
            }
            Some(f)
        }
        (f, c) => f.or(c),
    }
}

fn resolve_seed(io: &mut Io, flag: Option<u64>, config: Option<u64>) -> CliResult<u64> {
    if let Some(seed) = pick(io, "seed", flag, config) {
        return Ok(seed);
    }
    match std::env::var(SEED_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map_err(|_| CliError::Usage(format!("{SEED_ENV}={v:?} is not an unsigned integer"))),
        Err(_) => Ok(DEFAULT_SEED),
    }
}

struct ResolvedData {
    path: PathBuf,
    label: String,
    policy: MissingPolicy,
}

fn resolve_data(io: &mut Io, args: &DataArgs, cfg: &CliConfigFile) -> Option<ResolvedData> {
    let path = pick(io, "data", args.data.clone(), cfg.data.clone())?;
    let label = pick(io, "label", args.label.clone(), cfg.label.clone()).unwrap_or_else(|| DEFAULT_LABEL_COLUMN.into());
    let policy = pick(io, "missing", args.missing, cfg.missing).map_or(MissingPolicy::MeanImpute, Into::into);
    Some(ResolvedData { path, label, policy })
}

fn load(data: &ResolvedData) -> CliResult<Dataset<f64>> {
    Ok(data::load_dataset(&data.path, &data.label, data.policy)?)
}

fn pipeline_config(io: &mut Io, args: &SwarmArgs, cfg: &CliConfigFile) -> CliResult<PipelineConfig<f64>> {
    let mut pc = PipelineConfig::<f64>::default();
    let s = &mut pc.swarm;
    if let Some(v) = pick(io, "pop", args.pop, cfg.pop) {
        s.population_size = v;
    }
    if let Some(v) = pick(io, "iters", args.iters, cfg.iters) {
        s.max_iterations = v;
    }
    if let Some(v) = pick(io, "c1", args.c1, cfg.c1) {
        s.c1 = v;
    }
    if let Some(v) = pick(io, "c2", args.c2, cfg.c2) {
        s.c2 = v;
    }
    if let Some(v) = pick(io, "w-start", args.w_start, cfg.w_start) {
        s.w_start = v;
    }
    if let Some(v) = pick(io, "w-end", args.w_end, cfg.w_end) {
        s.w_end = v;
    }
    if let Some(v) = cfg.velocity_clamp {
        s.velocity_clamp_fraction = v;
    }
    if let Some(v) = cfg.scalar_rand {
        s.scalar_rand = v;
    }
    if let Some(v) = pick(io, "runs", args.runs, cfg.runs) {
        pc.n_runs = v;
    }
    if let Some(v) = pick(io, "prescriptions", args.prescriptions, cfg.prescriptions) {
        pc.n_prescriptions = v;
    }
    if let Some(v) = pick(io, "radius", args.radius, cfg.radius) {
        pc.distinctness_radius = v;
    }
    if let Some(fit) = &cfg.fit {
        pc.fit = fit.clone();
    }
    pc.base_seed = resolve_seed(io, args.seed, cfg.seed)?;
    pc.swarm.seed = pc.base_seed;
    pc.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    Ok(pc)
}

fn write_file(path: &Path, contents: &str) -> CliResult {
    fs::write(path, contents).map_err(|e| CliError::Runtime(format!("cannot write {}: {e}", path.display())))
}

fn to_json<T: Serialize>(value: &T) -> CliResult<String> {
    json::to_string(value).map_err(|e| CliError::Runtime(format!("serializing JSON: {e}")))
}

fn cmd_fit(args: FitArgs, io: &mut Io) -> CliResult {
    let cfg = load_config(args.output.config.as_deref())?;
    let data = resolve_data(io, &args.data, &cfg).ok_or_else(|| CliError::Usage("--data is required".into()))?;
    let out = pick(io, "out", args.output.out.clone(), cfg.out.clone());
    if out.is_none() && !args.output.json {
        return Err(CliError::Usage("--out is required unless --json is given".into()));
    }
    let d = load(&data)?;
    let options = cfg.fit.clone().unwrap_or_default();
    let (model, report) = logistic::fit(&d, &options)?;
    let file = ModelFile::new(&model, Some(report.clone()));
    let text = to_json(&file)?;
    if let Some(out) = &out {
        write_file(out, &text)?;
    }
    if args.output.json {
        return io.print(&text);
    }

    let mut s = String::new();
    s.push_str(&format!("{:<24} {:>20}\n", "term", "coefficient"));
    s.push_str(&format!("{:<24} {:>20.6}\n", "(intercept)", model.intercept()));
    for (name, b) in model.feature_names().iter().zip(model.coefficients()) {
        s.push_str(&format!("{name:<24} {b:>20.6}\n"));
    }
    s.push_str(&format!(
        "\nconverged: {}  iterations: {}  log-likelihood: {:.6}  max |gradient|: {:.3e}\n",
        report.converged, report.iterations, report.final_log_likelihood, report.max_abs_gradient
    ));
    if report.ridge_used > 0.0 {
        s.push_str(&format!("ridge used: {:e}\n", report.ridge_used));
    }
    if !report.converged {
        s.push_str("warning: fit did not converge; the data may be separable\n");
    }
    if let Some(out) = &out {
        s.push_str(&format!("model written to {}\n", out.display()));
    }
    io.print(&s)
}

fn read_model(path: &Path) -> CliResult<logistic::LogisticModel<f64>> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Runtime(format!("cannot read model {}: {e}", path.display())))?;
    let file: ModelFile<f64> =
        serde_json::from_str(&text).map_err(|e| CliError::Runtime(format!("invalid model {}: {e}", path.display())))?;
    Ok(file.model()?)
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct BoundsFile {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

fn read_bounds(path: &Path) -> CliResult<Bounds<f64>> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Runtime(format!("cannot read bounds {}: {e}", path.display())))?;
    let file: BoundsFile = serde_json::from_str(&text)
        .map_err(|e| CliError::Runtime(format!("invalid bounds {}: {e}", path.display())))?;
    Ok(Bounds::new(file.lower, file.upper)?)
}

fn emit_report(io: &mut Io, report: &PrescriptionReport<f64>, out: Option<&Path>, as_json: bool) -> CliResult {
    let text = to_json(report)?;
    if let Some(out) = out {
        write_file(out, &text)?;
    }
    if as_json {
        io.print(&text)
    } else {
        io.print(&report.render_table())?;
        if let Some(out) = out {
            io.print(&format!("report written to {}\n", out.display()))?;
        }
        Ok(())
    }
}

fn cmd_optimize(args: OptimizeArgs, io: &mut Io) -> CliResult {
    let cfg = load_config(args.output.config.as_deref())?;
    let model_path = pick(io, "model", args.model.clone(), cfg.model.clone())
        .ok_or_else(|| CliError::Usage("--model is required".into()))?;
    let pc = pipeline_config(io, &args.swarm, &cfg)?;
    let out = pick(io, "out", args.output.out.clone(), cfg.out.clone());

    let model = read_model(&model_path)?;
    let bounds = match (
        pick(io, "bounds", args.bounds.clone(), cfg.bounds.clone()),
        resolve_data(io, &args.data, &cfg),
    ) {
        (Some(path), _) => read_bounds(&path)?,
        (None, Some(data)) => data::compute_bounds(&load(&data)?)?,
        (None, None) => return Err(CliError::Usage("one of --data or --bounds is required".into())),
    };
    if bounds.dim() != model.n_features() {
        return Err(CliError::Runtime(format!(
            "model has {} features but the bounds have {}",
            model.n_features(),
            bounds.dim()
        )));
    }
    let report = pipeline::optimize(&model, &bounds, &pc)?;
    emit_report(io, &report, out.as_deref(), args.output.json)
}

fn default_model_path(report: &Path) -> PathBuf {
    let stem = report
        .file_stem()
        .map_or_else(|| "report".into(), |s| s.to_string_lossy().into_owned());
    report.with_file_name(format!("{stem}.model.json"))
}

fn cmd_pipeline(args: PipelineArgs, io: &mut Io) -> CliResult {
    let cfg = load_config(args.output.config.as_deref())?;
    let data = resolve_data(io, &args.data, &cfg).ok_or_else(|| CliError::Usage("--data is required".into()))?;
    let pc = pipeline_config(io, &args.swarm, &cfg)?;
    let out = pick(io, "out", args.output.out.clone(), cfg.out.clone());
    if out.is_none() && !args.output.json {
        return Err(CliError::Usage("--out is required unless --json is given".into()));
    }
    let model_out = pick(io, "model-out", args.model_out.clone(), cfg.model_out.clone())
        .or_else(|| out.as_deref().map(default_model_path));

    let d = load(&data)?;
    let report = pipeline::run_pipeline(&d, &pc)?;
    if let Some(path) = &model_out {
        write_file(path, &to_json(&report.model)?)?;
    }
    emit_report(io, &report, out.as_deref(), args.output.json)
}

/// Keeps the coefficient draws for `gen` off the stream that draws the rows.
const BETA_STREAM: u64 = 0x5eed_be7a;

/// Coefficients for `gen` when none are given: slopes uniform in `[-2, 2]`
/// and an intercept that puts the box centre at probability one half.
fn default_beta(n: usize, lower: f64, upper: f64, seed: u64) -> Vec<f64> {
    let mut rng = seeded_rng(seed ^ BETA_STREAM);
    let slopes: Vec<f64> = (0..n)
        .map(|_| -2.0 + 4.0 * rand::Rng::random::<f64>(&mut rng))
        .collect();
    let mid = 0.5 * (lower + upper);
    let intercept = -slopes.iter().map(|b| b * mid).sum::<f64>();
    std::iter::once(intercept).chain(slopes).collect()
}

fn cmd_gen(args: GenArgs, io: &mut Io) -> CliResult {
    if args.features < 1 {
        return Err(CliError::Usage("--features must be at least 1".into()));
    }
    if args.rows < 2 {
        return Err(CliError::Usage("--rows must be at least 2".into()));
    }
    if args.lower.partial_cmp(&args.upper) != Some(std::cmp::Ordering::Less) {
        return Err(CliError::Usage("--lower must be below --upper".into()));
    }
    let seed = resolve_seed(io, args.seed, None)?;
    let beta = match args.beta {
        Some(b) if b.len() != args.features + 1 => {
            return Err(CliError::Usage(format!(
                "--beta needs {} values (intercept first), got {}",
                args.features + 1,
                b.len()
            )))
        }
        Some(b) => b,
        None => default_beta(args.features, args.lower, args.upper, seed),
    };
    let ranges = Bounds::uniform(args.features, args.lower, args.upper)?;
    let (d, beta) = data::generate_synthetic(args.features, args.rows, &beta, &ranges, seed)
        .map_err(|e| CliError::Usage(e.to_string()))?;

    let mut csv = Vec::new();
    data::write_csv(&d, &mut csv, &args.label).map_err(|e| CliError::Runtime(e.to_string()))?;
    let beta_text = format!(
        "[{}]",
        beta.iter().map(|b| json::format_g17(*b)).collect::<Vec<_>>().join(", ")
    );
    match &args.out {
        Some(path) => {
            fs::write(path, &csv).map_err(|e| CliError::Runtime(format!("cannot write {}: {e}", path.display())))?;
            if args.json {
                io.print(&to_json(&serde_json::json!({ "seed": seed, "beta": beta }))?)
            } else {
                io.print(&format!(
                    "true beta: {beta_text}\nwrote {} rows to {}\n",
                    d.n_rows(),
                    path.display()
                ))
            }
        }
        None => {
            io.note(&format!("true beta: {beta_text}"));
            io.out
                .write_all(&csv)
                .map_err(|e| CliError::Runtime(format!("writing output: {e}")))
        }
    }
}
