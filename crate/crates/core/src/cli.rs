//! Command-line front end.
//!
//! Every command writes one CSV. Floats are rendered with Rust's shortest
//! round-trip formatting: plain decimal for `1e-5 ≤ |x| < 1e16`, scientific
//! otherwise. Errors print a single `ERROR <code>: <message>` line on stderr;
//! codes are 1 for I/O, 2 for usage and configuration, 3 for budget and
//! period violations and 4 for numerical failures.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::bridge::lamplighter::DEFAULT_MAX_ATTEMPTS;
use crate::bridge::projection::{expected_projection_range, lamplighter_projection_pmf, projection_range_tables};
use crate::error::Error;
use crate::kernels::{first_return_probabilities, return_probabilities};
use crate::range_stats::{
    max_distance_of_path, mc_range_experiment_with, range_of_path, ExperimentOptions, Mode,
    PathSampler, RangeSummary,
};
use crate::walk_models::{ball_volume, make_model, ModelKind, ModelSpec, WalkModel, DEFAULT_MAX_KEYS};

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Io(String),
    Model(Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Io(_) => 1,
            CliError::Usage(_) => 2,
            CliError::Model(e) => match e {
                Error::InvalidSpec(_) | Error::SymmetryViolation { .. } | Error::InvalidVertex { .. } => 2,
                Error::Budget { .. } | Error::Period { .. } => 3,
                _ => 4,
            },
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Io(m) => f.write_str(m),
            CliError::Model(e) => write!(f, "{e}"),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Model(e)
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

#[derive(Parser, Debug)]
#[command(name = "bridgewalk", version, about = "Return kernels, bridges and range statistics of random walks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Exact u_n, f_n and partial sums F_n.
    Kernels {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long)]
        nmax: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Monte Carlo range summary of sampled bridges.
    Bridge {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        trials: u64,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        dump_paths: Option<PathBuf>,
        #[arg(long)]
        workers: Option<usize>,
        #[arg(long, default_value_t = DEFAULT_MAX_ATTEMPTS)]
        max_attempts: u64,
    },
    /// Range experiment over an n grid from a JSON config.
    Experiment {
        #[arg(long)]
        config: PathBuf,
        /// Overrides the config's worker count; results do not depend on it.
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Projected range law of lamplighter bridges.
    Lamplighter {
        #[arg(long)]
        dim: usize,
        #[arg(long)]
        nmax: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Ball volumes |B(n)|.
    Volume {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long)]
        nmax: usize,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = DEFAULT_MAX_KEYS)]
        max_keys: u64,
    },
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum KindArg {
    Tree,
    Lattice,
    Lamplighter,
}

#[derive(Args, Debug)]
struct ModelArgs {
    #[arg(long, value_enum)]
    model: KindArg,
    #[arg(long)]
    b: Option<u32>,
    #[arg(long)]
    dim: Option<usize>,
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    jumps: Option<Vec<i64>>,
}

impl ModelArgs {
    fn params(&self) -> ModelParams {
        ModelParams {
            b: self.b,
            dim: self.dim,
            jumps: self.jumps.clone(),
        }
    }

    fn kind(&self) -> ModelKind {
        match self.model {
            KindArg::Tree => ModelKind::Tree,
            KindArg::Lattice => ModelKind::Lattice,
            KindArg::Lamplighter => ModelKind::Lamplighter,
        }
    }

    fn build(&self) -> CliResult<WalkModel> {
        let spec = resolve_spec(self.kind(), &self.params())?;
        Ok(make_model(&spec)?)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelParams {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dim: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub jumps: Option<Vec<i64>>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BudgetConfig {
    /// Rejection attempts per lamplighter bridge.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_attempts: Option<u64>,
}

fn default_mode() -> Mode {
    Mode::Bridge
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: ModelKind,
    #[serde(default)]
    pub params: ModelParams,
    #[serde(default = "default_mode")]
    pub mode: Mode,
    /// Single length; folded into `n_grid` on load.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(default)]
    pub n_grid: Vec<usize>,
    pub trials: u64,
    pub seed: u64,
    pub out: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub workers: Option<usize>,
    #[serde(default)]
    pub budget: BudgetConfig,
}

impl ExperimentConfig {
    /// Checks every field and fills defaults; the result is a fixed point.
    pub fn resolve(mut self) -> CliResult<Self> {
        let field = |name: &str, msg: &str| CliError::Usage(format!("config field `{name}`: {msg}"));
        if let Some(n) = self.n.take() {
            if !self.n_grid.is_empty() {
                return Err(field("n", "give either `n` or `n_grid`, not both"));
            }
            self.n_grid = vec![n];
        }
        if self.n_grid.is_empty() {
            return Err(field("n_grid", "must list at least one length"));
        }
        if self.n_grid.contains(&0) {
            return Err(field("n_grid", "lengths must be >= 1"));
        }
        self.n_grid.sort_unstable();
        self.n_grid.dedup();
        if self.trials == 0 {
            return Err(field("trials", "must be >= 1"));
        }
        if self.workers == Some(0) {
            return Err(field("workers", "must be >= 1"));
        }
        if self.budget.max_attempts == Some(0) {
            return Err(field("budget.max_attempts", "must be >= 1"));
        }
        self.budget.max_attempts.get_or_insert(DEFAULT_MAX_ATTEMPTS);
        let spec = resolve_spec(self.kind, &self.params)?;
        self.params = match &spec {
            ModelSpec::Tree { b } => ModelParams {
                b: Some(*b),
                ..Default::default()
            },
            ModelSpec::Lattice { dim, jumps } => ModelParams {
                dim: Some(*dim),
                jumps: Some(jumps.clone()),
                ..Default::default()
            },
            ModelSpec::Lamplighter { dim } => ModelParams {
                dim: Some(*dim),
                ..Default::default()
            },
        };
        make_model(&spec)?;
        Ok(self)
    }

    pub fn model(&self) -> CliResult<WalkModel> {
        Ok(make_model(&resolve_spec(self.kind, &self.params)?)?)
    }
}

/// Reads, parses and validates an experiment config.
pub fn load_config(path: &Path) -> CliResult<ExperimentConfig> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Io(format!("cannot read {}: {e}", path.display())))?;
    let raw: ExperimentConfig = serde_json::from_str(&text)
        .map_err(|e| CliError::Usage(format!("config {}: {e}", path.display())))?;
    raw.resolve()
}

fn resolve_spec(kind: ModelKind, p: &ModelParams) -> CliResult<ModelSpec> {
    let reject = |name: &str| {
        Err(CliError::Usage(format!(
            "parameter `{name}` does not apply to model {kind}"
        )))
    };
    match kind {
        ModelKind::Tree => {
            if p.dim.is_some() {
                return reject("dim");
            }
            if p.jumps.is_some() {
                return reject("jumps");
            }
            let b = p
                .b
                .ok_or_else(|| CliError::Usage("tree model needs parameter `b`".into()))?;
            Ok(ModelSpec::Tree { b })
        }
        ModelKind::Lattice => {
            if p.b.is_some() {
                return reject("b");
            }
            Ok(ModelSpec::Lattice {
                dim: p.dim.unwrap_or(1),
                jumps: p.jumps.clone().unwrap_or_else(|| vec![1]),
            })
        }
        ModelKind::Lamplighter => {
            if p.b.is_some() {
                return reject("b");
            }
            if p.jumps.is_some() {
                return reject("jumps");
            }
            Ok(ModelSpec::Lamplighter {
                dim: p.dim.unwrap_or(1),
            })
        }
    }
}

/// Shortest round-trip rendering used in every CSV.
pub fn fmt_float(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    let a = x.abs();
    if (1e-5..1e16).contains(&a) {
        format!("{x}")
    } else {
        format!("{x:e}")
    }
}

fn write_file(path: &Path, text: &str) -> CliResult<()> {
    fs::write(path, text).map_err(|e| CliError::Io(format!("cannot write {}: {e}", path.display())))
}

pub fn summary_csv(rows: &[RangeSummary]) -> String {
    let mut out = String::from(RangeSummary::CSV_HEADER);
    out.push('\n');
    for s in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            s.model,
            s.n,
            s.mode,
            s.trials,
            s.seed,
            fmt_float(s.mean_range),
            fmt_float(s.var_range),
            fmt_float(s.ci95),
            s.mean_maxdist.map(fmt_float).unwrap_or_default()
        );
    }
    out
}

fn kernels_csv(model: &WalkModel, nmax: usize) -> CliResult<String> {
    let u = return_probabilities(model, nmax)?;
    let f = first_return_probabilities(&u)?;
    let mut out = String::from("n,u,log_u,f,F_partial\n");
    for n in 0..=nmax {
        let _ = writeln!(
            out,
            "{n},{},{},{},{}",
            fmt_float(u.u[n]),
            fmt_float(u.log_u[n]),
            fmt_float(f.f[n]),
            fmt_float(f.partial[n])
        );
    }
    Ok(out)
}

fn lamplighter_csv(dim: usize, nmax: usize) -> CliResult<String> {
    if dim != 1 {
        return Err(CliError::Usage(format!(
            "the projected range law is only available for --dim 1, got {dim}"
        )));
    }
    let tables = projection_range_tables(nmax)?;
    let mut out = String::from("n,r,q_r,pmf,expected_N\n");
    for t in tables.iter().filter(|t| t.n > 0) {
        let pmf = lamplighter_projection_pmf(t);
        let mean = fmt_float(expected_projection_range(t));
        for (r, q) in t.q.iter().enumerate() {
            if *q > 0.0 {
                let _ = writeln!(out, "{},{r},{},{},{mean}", t.n, fmt_float(*q), fmt_float(pmf.probs[r]));
            }
        }
    }
    Ok(out)
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().fold(String::with_capacity(2 * bytes.len()), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

/// One row per trial: `trial,n,seed,range,max_distance,vertices`, with
/// vertices as hex canonical keys joined by `|`.
fn paths_csv(
    model: &WalkModel,
    n: usize,
    trials: u64,
    seed: u64,
    max_attempts: u64,
) -> CliResult<String> {
    let sampler = PathSampler::new(model, n, Mode::Bridge, max_attempts)?;
    let mut out = String::from("trial,n,seed,range,max_distance,vertices\n");
    for t in 0..trials {
        let path = sampler.sample(model, seed, t)?;
        let dist = if model.has_fast_distance() {
            max_distance_of_path(model, &path)?.to_string()
        } else {
            String::new()
        };
        let keys: Vec<String> = path.iter().map(|v| hex(&model.canonical_key(v))).collect();
        let _ = writeln!(
            out,
            "{t},{n},{seed},{},{dist},{}",
            range_of_path(model, &path),
            keys.join("|")
        );
    }
    Ok(out)
}

fn volume_csv(model: &WalkModel, nmax: usize, max_keys: u64) -> CliResult<String> {
    let curve = ball_volume(model, nmax, max_keys)?;
    let mut out = String::from("n,volume\n");
    for (n, v) in curve.volumes.iter().enumerate() {
        let _ = writeln!(out, "{n},{v}");
    }
    Ok(out)
}

fn run_experiment(config: &ExperimentConfig, workers: Option<usize>) -> CliResult<()> {
    let model = config.model()?;
    let options = ExperimentOptions {
        workers: workers.or(config.workers),
        max_attempts: config.budget.max_attempts.unwrap_or(DEFAULT_MAX_ATTEMPTS),
    };
    let rows = config
        .n_grid
        .iter()
        .map(|&n| mc_range_experiment_with(&model, n, config.trials, config.mode, config.seed, options))
        .collect::<Result<Vec<_>, _>>()?;
    write_file(&config.out, &summary_csv(&rows))
}

/// Parses `argv` (including the program name) and runs the command.
pub fn run<I, T>(argv: I) -> CliResult<()>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = Cli::try_parse_from(argv).map_err(|e| match e.kind() {
        clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => {
            CliError::Usage(String::new())
        }
        _ => CliError::Usage(e.to_string().lines().next().unwrap_or("").to_string()),
    })?;
    match cli.command {
        Command::Kernels { model, nmax, out } => {
            let m = model.build()?;
            write_file(&out, &kernels_csv(&m, nmax)?)
        }
        Command::Bridge {
            model,
            n,
            trials,
            seed,
            out,
            dump_paths,
            workers,
            max_attempts,
        } => {
            let m = model.build()?;
            if trials == 0 {
                return Err(CliError::Usage("--trials must be >= 1".into()));
            }
            let options = ExperimentOptions {
                workers,
                max_attempts,
            };
            let summary = mc_range_experiment_with(&m, n, trials, Mode::Bridge, seed, options)?;
            write_file(&out, &summary_csv(&[summary]))?;
            if let Some(path) = dump_paths {
                write_file(&path, &paths_csv(&m, n, trials, seed, max_attempts)?)?;
            }
            Ok(())
        }
        Command::Experiment { config, workers } => {
            let cfg = load_config(&config)?;
            println!(
                "{}",
                serde_json::to_string_pretty(&cfg).expect("config serializes")
            );
            run_experiment(&cfg, workers)
        }
        Command::Lamplighter { dim, nmax, out } => write_file(&out, &lamplighter_csv(dim, nmax)?),
        Command::Volume {
            model,
            nmax,
            out,
            max_keys,
        } => {
            let m = model.build()?;
            write_file(&out, &volume_csv(&m, nmax, max_keys)?)
        }
    }
}

/// Runs the command and returns the process exit code.
pub fn run_command<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let argv: Vec<OsString> = argv.into_iter().map(Into::into).collect();
    if let Err(e) = Cli::try_parse_from(&argv) {
        if matches!(
            e.kind(),
            clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion
        ) {
            let _ = e.print();
            return 0;
        }
    }
    match run(argv) {
        Ok(()) => 0,
        Err(e) => {
            let code = e.exit_code();
            eprintln!("ERROR {code}: {e}");
            code
        }
    }
}
