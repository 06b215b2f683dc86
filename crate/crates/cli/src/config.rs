use std::path::{Path, PathBuf};

use clap::{Parser, ValueEnum};
use serde::{Deserialize, Serialize};

use ewpitman::martingale::DEFAULT_DELTA;
use ewpitman::{ModelParams, ScalingParams};

use crate::error::CliError;

/// Environment variable naming the directory for reports written without `--out`.
pub const OUTPUT_DIR_ENV: &str = "EWPITMAN_OUTPUT_DIR";

pub const DEFAULT_REPLICATES: usize = 10_000;
pub const DEFAULT_EPS: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    Sample,
    Exact,
    Constants,
    Lln,
    Clt,
    Martingale,
    Diagnostics,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Sample => "sample",
            Command::Exact => "exact",
            Command::Constants => "constants",
            Command::Lln => "lln",
            Command::Clt => "clt",
            Command::Martingale => "martingale",
            Command::Diagnostics => "diagnostics",
        }
    }

    fn needs_sizes(self) -> bool {
        self != Command::Constants
    }

    fn accepts_theta(self) -> bool {
        matches!(self, Command::Sample | Command::Exact)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

#[derive(Debug, Parser)]
#[command(name = "ewpitman", version, about = "Ewens-Pitman linear-regime experiments")]
pub struct Args {
    #[arg(long, value_enum)]
    pub command: Option<Command>,
    /// Slope of θ = λn (repeatable).
    #[arg(long = "lambda", value_name = "LAMBDA", allow_negative_numbers = true)]
    pub lambdas: Vec<f64>,
    /// Discount α ∈ [0, 1) (repeatable).
    #[arg(long = "alpha", value_name = "ALPHA", allow_negative_numbers = true)]
    pub alphas: Vec<f64>,
    /// Fixed θ for `exact` and `sample`, instead of θ = λn (repeatable).
    #[arg(long = "theta", value_name = "THETA", allow_negative_numbers = true)]
    pub thetas: Vec<f64>,
    /// Sample size (repeatable).
    #[arg(long = "n", value_name = "N")]
    pub ns: Vec<usize>,
    #[arg(long)]
    pub replicates: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, allow_negative_numbers = true)]
    pub delta: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub eps: Option<f64>,
    /// Report path; `-` writes to stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    /// Worker threads; 0 uses every logical core.
    #[arg(long)]
    pub threads: Option<usize>,
    /// TOML file with the same keys as the flags; flags take precedence.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    command: Option<Command>,
    #[serde(default)]
    lambda: OneOrMany<f64>,
    #[serde(default)]
    alpha: OneOrMany<f64>,
    #[serde(default)]
    theta: OneOrMany<f64>,
    #[serde(default)]
    n: OneOrMany<usize>,
    replicates: Option<usize>,
    seed: Option<u64>,
    delta: Option<f64>,
    eps: Option<f64>,
    out: Option<PathBuf>,
    format: Option<Format>,
    threads: Option<usize>,
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum OneOrMany<T> {
    One(T),
    Many(Vec<T>),
}

impl<T> Default for OneOrMany<T> {
    fn default() -> Self {
        OneOrMany::Many(Vec::new())
    }
}

impl<T> OneOrMany<T> {
    fn into_vec(self) -> Vec<T> {
        match self {
            OneOrMany::One(x) => vec![x],
            OneOrMany::Many(v) => v,
        }
    }
}

/// Where a grid's model parameters come from.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Grid {
    /// `θ = λn` for every `(λ, α)`.
    Scaling(Vec<ScalingParams>),
    /// Fixed `(α, θ)` independent of `n`.
    Fixed(Vec<ModelParams>),
}

impl Grid {
    pub fn len(&self) -> usize {
        match self {
            Grid::Scaling(v) => v.len(),
            Grid::Fixed(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub command: Command,
    pub grid: Grid,
    pub n: Vec<usize>,
    pub replicates: usize,
    pub seed: u64,
    pub delta: f64,
    pub eps: f64,
    #[serde(skip)]
    pub out: Option<PathBuf>,
    pub format: Format,
    #[serde(skip)]
    pub threads: usize,
}

impl ExperimentConfig {
    /// Destination of the report; `None` means stdout.
    pub fn output_path(&self) -> Option<PathBuf> {
        match &self.out {
            Some(p) if p.as_os_str() == "-" => None,
            Some(p) => Some(p.clone()),
            None => {
                let dir = std::env::var_os(OUTPUT_DIR_ENV)
                    .map(PathBuf::from)
                    .unwrap_or_else(|| PathBuf::from("."));
                let ext = match self.format {
                    Format::Csv => "csv",
                    Format::Json => "json",
                };
                Some(dir.join(format!("{}.{ext}", self.command.name())))
            }
        }
    }
}

/// Parses flags (and the optional config file they name) into a validated
/// configuration. `argv[0]` is the program name.
pub fn parse_config<I, T>(argv: I) -> Result<ExperimentConfig, CliError>
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let args = Args::try_parse_from(argv).map_err(|e| match e.kind() {
        clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => {
            CliError::Info(e.to_string())
        }
        _ => CliError::Usage(e.to_string().trim_end().to_string()),
    })?;
    let file = match &args.config {
        Some(path) => read_file_config(path)?,
        None => FileConfig::default(),
    };
    merge(args, file)
}

fn read_file_config(path: &Path) -> Result<FileConfig, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Usage(format!("--config {}: {e}", path.display())))?;
    toml::from_str(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
}

fn pick<T>(flag: Vec<T>, file: OneOrMany<T>) -> Vec<T> {
    if flag.is_empty() {
        file.into_vec()
    } else {
        flag
    }
}

fn merge(args: Args, file: FileConfig) -> Result<ExperimentConfig, CliError> {
    let command = args
        .command
        .or(file.command)
        .ok_or_else(|| CliError::Usage("--command is required".into()))?;
    let lambdas = pick(args.lambdas, file.lambda);
    let alphas = pick(args.alphas, file.alpha);
    let thetas = pick(args.thetas, file.theta);
    let mut n = pick(args.ns, file.n);
    // Rows come out in increasing n, and rate fits need distinct sizes.
    n.sort_unstable();
    n.dedup();

    for &a in &alphas {
        if !(0.0..1.0).contains(&a) {
            return Err(CliError::Usage(format!("--alpha {a}: alpha must lie in [0, 1)")));
        }
    }
    for &l in &lambdas {
        if !(l.is_finite() && l > 0.0) {
            return Err(CliError::Usage(format!("--lambda {l}: lambda must be > 0")));
        }
    }
    if alphas.is_empty() {
        return Err(CliError::Usage("at least one --alpha is required".into()));
    }

    let grid = if !thetas.is_empty() {
        if !command.accepts_theta() {
            return Err(CliError::Usage(format!(
                "--theta: only the exact and sample commands take a fixed theta, not {}",
                command.name()
            )));
        }
        if !lambdas.is_empty() {
            return Err(CliError::Usage("--theta and --lambda are mutually exclusive".into()));
        }
        let mut cells = Vec::new();
        for &theta in &thetas {
            for &alpha in &alphas {
                cells.push(ModelParams::new(alpha, theta).map_err(|_| {
                    CliError::Usage(format!("--theta {theta}: theta must exceed -alpha = {}", -alpha))
                })?);
            }
        }
        Grid::Fixed(cells)
    } else {
        if lambdas.is_empty() {
            return Err(CliError::Usage("at least one --lambda is required".into()));
        }
        let mut cells = Vec::new();
        for &lambda in &lambdas {
            for &alpha in &alphas {
                cells.push(ScalingParams::new(alpha, lambda).map_err(|e| CliError::Usage(e.to_string()))?);
            }
        }
        Grid::Scaling(cells)
    };

    if command.needs_sizes() && n.is_empty() {
        return Err(CliError::Usage(format!("--n is required for {}", command.name())));
    }
    if let Some(&bad) = n.iter().find(|&&n| n == 0) {
        return Err(CliError::Usage(format!("--n {bad}: n must be at least 1")));
    }

    let replicates = args.replicates.or(file.replicates).unwrap_or(DEFAULT_REPLICATES);
    if replicates == 0 {
        return Err(CliError::Usage("--replicates 0: need at least one replicate".into()));
    }
    let delta = args.delta.or(file.delta).unwrap_or(DEFAULT_DELTA);
    if !(delta > 0.0 && delta <= 1.0) {
        return Err(CliError::Usage(format!("--delta {delta}: delta must lie in (0, 1]")));
    }
    let eps = args.eps.or(file.eps).unwrap_or(DEFAULT_EPS);
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(CliError::Usage(format!("--eps {eps}: eps must be > 0")));
    }

    Ok(ExperimentConfig {
        command,
        grid,
        n,
        replicates,
        seed: args.seed.or(file.seed).unwrap_or(0),
        delta,
        eps,
        out: args.out.or(file.out),
        format: args.format.or(file.format).unwrap_or_default(),
        threads: args.threads.or(file.threads).unwrap_or(0),
    })
}
