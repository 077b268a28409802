//! Run configuration, argument parsing and CSV output for the `taming-sde`
//! binary.
//!
//! Settings come from, in decreasing priority: command-line flags, the
//! `TAMING_SDE_SEED` environment variable (seed only), a flat `key = value`
//! config file given with `--config`, and built-in defaults.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use thiserror::Error;

use crate::harness::{
    efficiency_from_table, fit_order, moment_probe, strong_error_tables, ErrorTable, Execution,
    ExperimentConfig, MomentEstimate,
};
use crate::model::{builtin_model, probe_assumptions, SdeModel};
use crate::schemes::SchemeKind;
use crate::error::{HarnessError, ModelError};

pub const SEED_ENV_VAR: &str = "TAMING_SDE_SEED";

pub const CSV_HEADER: &str = "scheme,model,N,h,mse,mse_stderr,rmse,paths,runtime_ms";
pub const MOMENT_CSV_HEADER: &str = "scheme,model,N,p,moment,stderr,paths,blow_ups";

pub const DEFAULT_STEPS: [usize; 6] = [16, 32, 64, 128, 256, 512];
pub const DEFAULT_PATHS: usize = 1000;
pub const DEFAULT_SEED: u64 = 42;
pub const DEFAULT_REF_MULTIPLIER: usize = 16;
pub const DEFAULT_TARGET_EPS: f64 = 1e-3;
pub const DEFAULT_MOMENT_P: f64 = 4.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Convergence,
    Efficiency,
    Moments,
    Check,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Convergence => "convergence",
            Command::Efficiency => "efficiency",
            Command::Moments => "moments",
            Command::Check => "check",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub command: Command,
    pub model: String,
    pub schemes: Vec<SchemeKind>,
    /// Strictly increasing powers of two.
    pub step_counts: Vec<usize>,
    pub paths: usize,
    pub master_seed: u64,
    pub ref_multiplier: usize,
    pub target_eps: f64,
    pub moment_p: f64,
    pub output: Option<PathBuf>,
    pub allow_noncommutative: bool,
    pub no_runtime: bool,
    pub serial: bool,
}

#[derive(Debug, Error)]
pub enum ConfigError {
    /// `--help` or `--version`; not a failure.
    #[error("{text}")]
    Help { text: String },
    #[error("{text}")]
    Usage { text: String },
    #[error("no model given (use --model or `model = ...`; builtins: poly5, gbm, diag2, noncomm2)")]
    MissingModel,
    #[error("unknown model `{0}` (builtins: poly5, gbm, diag2, noncomm2)")]
    UnknownModel(String),
    #[error(transparent)]
    UnknownScheme(#[from] crate::schemes::UnknownScheme),
    #[error("malformed number for `{key}`: `{value}`")]
    MalformedNumber { key: String, value: String },
    #[error("step count {0} is not a power of two")]
    NotPowerOfTwo(usize),
    #[error("step counts must be strictly increasing")]
    NotIncreasing,
    #[error("`{key}` must not be empty")]
    Empty { key: String },
    #[error("need at least 2 paths, got {0}")]
    TooFewPaths(usize),
    #[error("invalid value for `{key}`: {value} ({reason})")]
    InvalidValue {
        key: String,
        value: String,
        reason: &'static str,
    },
    #[error("{path}:{line}: unknown key `{key}`")]
    UnknownKey {
        path: String,
        line: usize,
        key: String,
    },
    #[error("{path}:{line}: expected `key = value`, got `{text}`")]
    MalformedLine {
        path: String,
        line: usize,
        text: String,
    },
    #[error("cannot read config file {path}: {source}")]
    ConfigFile {
        path: String,
        #[source]
        source: io::Error,
    },
}

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Harness(#[from] HarnessError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("cannot write {path}: {source}")]
    Write {
        path: String,
        #[source]
        source: io::Error,
    },
    #[error(transparent)]
    Io(#[from] io::Error),
}

#[derive(Parser, Debug)]
#[command(
    name = "taming-sde",
    version,
    about = "Strong-error experiments for tamed Euler and tamed Milstein steppers",
    arg_required_else_help = true
)]
struct Cli {
    #[command(subcommand)]
    command: CliCommand,
}

#[derive(Subcommand, Debug)]
enum CliCommand {
    /// RMS strong error versus step size, with fitted convergence orders.
    Convergence(RunArgs),
    /// Smallest step count per scheme reaching a target RMS error.
    Efficiency(RunArgs),
    /// Monte Carlo p-th moments of the terminal state.
    Moments(RunArgs),
    /// Commutativity and Lipschitz-constant diagnostics for a model.
    Check(RunArgs),
}

#[derive(Args, Debug)]
struct RunArgs {
    /// Flat `key = value` file; flags take precedence.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Builtin model: poly5, gbm, diag2, noncomm2.
    #[arg(long)]
    model: Option<String>,
    /// Comma-separated schemes [default: tamed-euler,tamed-milstein].
    #[arg(long, value_name = "LIST")]
    schemes: Option<String>,
    /// Comma-separated, strictly increasing powers of two [default: 16,32,64,128,256,512].
    #[arg(long, value_name = "LIST")]
    steps: Option<String>,
    /// Monte Carlo paths [default: 1000].
    #[arg(long)]
    paths: Option<String>,
    /// Master seed [default: 42, or $TAMING_SDE_SEED].
    #[arg(long)]
    seed: Option<String>,
    /// Reference resolution as a multiple of the finest step count [default: 16].
    #[arg(long)]
    ref_multiplier: Option<String>,
    /// Target RMS error for `efficiency` [default: 0.001].
    #[arg(long)]
    target_eps: Option<String>,
    /// Moment order for `moments` [default: 4].
    #[arg(long)]
    moment_p: Option<String>,
    /// Write CSV here instead of standard output.
    #[arg(long, value_name = "PATH")]
    output: Option<PathBuf>,
    /// Run Milstein variants on non-commutative noise (not a valid Milstein scheme).
    #[arg(long)]
    allow_noncommutative: bool,
    /// Write 0 in the runtime column so output is byte-reproducible.
    #[arg(long)]
    no_runtime: bool,
    /// Simulate paths on one thread.
    #[arg(long)]
    serial: bool,
}

const FILE_KEYS: [&str; 12] = [
    "model",
    "schemes",
    "steps",
    "paths",
    "seed",
    "ref_multiplier",
    "target_eps",
    "moment_p",
    "output",
    "allow_noncommutative",
    "no_runtime",
    "serial",
];

fn read_config_file(path: &Path) -> Result<BTreeMap<String, String>, ConfigError> {
    let text = fs::read_to_string(path).map_err(|source| ConfigError::ConfigFile {
        path: path.display().to_string(),
        source,
    })?;
    parse_config_text(&text, &path.display().to_string())
}

/// Parses `key = value` lines. Blank lines and `#` comments are ignored;
/// dashes in keys are read as underscores.
pub fn parse_config_text(text: &str, origin: &str) -> Result<BTreeMap<String, String>, ConfigError> {
    let mut values = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(ConfigError::MalformedLine {
                path: origin.to_string(),
                line: i + 1,
                text: line.to_string(),
            });
        };
        let key = key.trim().replace('-', "_");
        if !FILE_KEYS.contains(&key.as_str()) {
            return Err(ConfigError::UnknownKey {
                path: origin.to_string(),
                line: i + 1,
                key,
            });
        }
        values.insert(key, value.trim().to_string());
    }
    Ok(values)
}

fn parse_number<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, ConfigError> {
    value.trim().parse().map_err(|_| ConfigError::MalformedNumber {
        key: key.to_string(),
        value: value.to_string(),
    })
}

fn parse_bool(key: &str, value: &str) -> Result<bool, ConfigError> {
    match value.trim() {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        _ => Err(ConfigError::InvalidValue {
            key: key.to_string(),
            value: value.to_string(),
            reason: "expected true or false",
        }),
    }
}

pub fn parse_step_counts(value: &str) -> Result<Vec<usize>, ConfigError> {
    let steps: Vec<usize> = value
        .split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|s| parse_number("steps", s))
        .collect::<Result<_, _>>()?;
    if steps.is_empty() {
        return Err(ConfigError::Empty {
            key: "steps".to_string(),
        });
    }
    if let Some(&bad) = steps.iter().find(|n| !n.is_power_of_two()) {
        return Err(ConfigError::NotPowerOfTwo(bad));
    }
    if steps.windows(2).any(|w| w[0] >= w[1]) {
        return Err(ConfigError::NotIncreasing);
    }
    Ok(steps)
}

pub fn parse_schemes(value: &str) -> Result<Vec<SchemeKind>, ConfigError> {
    let schemes: Vec<SchemeKind> = value
        .split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|s| s.parse::<SchemeKind>().map_err(ConfigError::UnknownScheme))
        .collect::<Result<_, _>>()?;
    if schemes.is_empty() {
        return Err(ConfigError::Empty {
            key: "schemes".to_string(),
        });
    }
    Ok(schemes)
}

/// Parses `argv` (program name first), reading the seed override from the
/// process environment.
pub fn parse_config<I, T>(argv: I) -> Result<RunConfig, ConfigError>
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    parse_config_with_env(argv, std::env::var(SEED_ENV_VAR).ok())
}

pub fn parse_config_with_env<I, T>(argv: I, env_seed: Option<String>) -> Result<RunConfig, ConfigError>
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = Cli::try_parse_from(argv).map_err(|e| {
        use clap::error::ErrorKind;
        let text = e.render().to_string();
        match e.kind() {
            ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ConfigError::Help { text },
            _ => ConfigError::Usage { text },
        }
    })?;
    let (command, args) = match cli.command {
        CliCommand::Convergence(a) => (Command::Convergence, a),
        CliCommand::Efficiency(a) => (Command::Efficiency, a),
        CliCommand::Moments(a) => (Command::Moments, a),
        CliCommand::Check(a) => (Command::Check, a),
    };

    let file = match &args.config {
        Some(path) => read_config_file(path)?,
        None => BTreeMap::new(),
    };
    let pick = |flag: &Option<String>, key: &str| -> Option<String> {
        flag.clone().or_else(|| file.get(key).cloned())
    };

    let model = pick(&args.model, "model").ok_or(ConfigError::MissingModel)?;
    if builtin_model(&model).is_none() {
        return Err(ConfigError::UnknownModel(model));
    }
    let schemes = match pick(&args.schemes, "schemes") {
        Some(v) => parse_schemes(&v)?,
        None => vec![SchemeKind::TamedEuler, SchemeKind::TamedMilstein],
    };
    let step_counts = match pick(&args.steps, "steps") {
        Some(v) => parse_step_counts(&v)?,
        None => DEFAULT_STEPS.to_vec(),
    };
    let paths = match pick(&args.paths, "paths") {
        Some(v) => parse_number("paths", &v)?,
        None => DEFAULT_PATHS,
    };
    if paths < 2 {
        return Err(ConfigError::TooFewPaths(paths));
    }
    let seed_source = args
        .seed
        .clone()
        .map(|v| ("seed", v))
        .or_else(|| env_seed.map(|v| (SEED_ENV_VAR, v)))
        .or_else(|| file.get("seed").map(|v| ("seed", v.clone())));
    let master_seed = match seed_source {
        Some((key, v)) => parse_number(key, &v)?,
        None => DEFAULT_SEED,
    };
    let ref_multiplier: usize = match pick(&args.ref_multiplier, "ref_multiplier") {
        Some(v) => parse_number("ref_multiplier", &v)?,
        None => DEFAULT_REF_MULTIPLIER,
    };
    if !ref_multiplier.is_power_of_two() || ref_multiplier < 4 {
        return Err(ConfigError::InvalidValue {
            key: "ref_multiplier".to_string(),
            value: ref_multiplier.to_string(),
            reason: "must be a power of two, at least 4",
        });
    }
    let target_eps: f64 = match pick(&args.target_eps, "target_eps") {
        Some(v) => parse_number("target_eps", &v)?,
        None => DEFAULT_TARGET_EPS,
    };
    if !(target_eps > 0.0) {
        return Err(ConfigError::InvalidValue {
            key: "target_eps".to_string(),
            value: target_eps.to_string(),
            reason: "must be positive",
        });
    }
    let moment_p: f64 = match pick(&args.moment_p, "moment_p") {
        Some(v) => parse_number("moment_p", &v)?,
        None => DEFAULT_MOMENT_P,
    };
    if !(moment_p >= 1.0 && moment_p.is_finite()) {
        return Err(ConfigError::InvalidValue {
            key: "moment_p".to_string(),
            value: moment_p.to_string(),
            reason: "must be a finite number at least 1",
        });
    }
    let output = args
        .output
        .clone()
        .or_else(|| file.get("output").map(PathBuf::from));
    let flag = |set: bool, key: &str| -> Result<bool, ConfigError> {
        if set {
            return Ok(true);
        }
        file.get(key).map_or(Ok(false), |v| parse_bool(key, v))
    };

    Ok(RunConfig {
        command,
        model,
        schemes,
        step_counts,
        paths,
        master_seed,
        ref_multiplier,
        target_eps,
        moment_p,
        output,
        allow_noncommutative: flag(args.allow_noncommutative, "allow_noncommutative")?,
        no_runtime: flag(args.no_runtime, "no_runtime")?,
        serial: flag(args.serial, "serial")?,
    })
}

fn join<T: fmt::Display>(items: &[T]) -> String {
    items.iter().map(ToString::to_string).collect::<Vec<_>>().join(",")
}

/// Argument vector (program name first) that parses back to `config`.
pub fn render(config: &RunConfig) -> Vec<String> {
    let mut argv = vec![
        "taming-sde".to_string(),
        config.command.name().to_string(),
        "--model".to_string(),
        config.model.clone(),
        "--schemes".to_string(),
        join(&config.schemes),
        "--steps".to_string(),
        join(&config.step_counts),
        "--paths".to_string(),
        config.paths.to_string(),
        "--seed".to_string(),
        config.master_seed.to_string(),
        "--ref-multiplier".to_string(),
        config.ref_multiplier.to_string(),
        "--target-eps".to_string(),
        config.target_eps.to_string(),
        "--moment-p".to_string(),
        config.moment_p.to_string(),
    ];
    if let Some(path) = &config.output {
        argv.push("--output".to_string());
        argv.push(path.display().to_string());
    }
    for (set, name) in [
        (config.allow_noncommutative, "--allow-noncommutative"),
        (config.no_runtime, "--no-runtime"),
        (config.serial, "--serial"),
    ] {
        if set {
            argv.push(name.to_string());
        }
    }
    argv
}

/// Plain decimal notation with 17 significant digits.
pub fn format_sig17(v: f64) -> String {
    if !v.is_finite() {
        return if v.is_nan() {
            "NaN".to_string()
        } else if v > 0.0 {
            "inf".to_string()
        } else {
            "-inf".to_string()
        };
    }
    if v == 0.0 {
        return format!("{:.16}", 0.0);
    }
    // Exponent after rounding to 17 digits, so 9.99…95 is handled.
    let sci = format!("{:.16e}", v);
    let exponent: i32 = sci[sci.find('e').expect("exponent") + 1..]
        .parse()
        .expect("integer exponent");
    let decimals = (16 - exponent).max(0) as usize;
    format!("{:.*}", decimals, v)
}

/// Writes the header and one row per `(scheme, N)`.
pub fn write_csv<W: Write>(tables: &[ErrorTable], no_runtime: bool, out: &mut W) -> io::Result<()> {
    writeln!(out, "{CSV_HEADER}")?;
    for table in tables {
        for row in &table.rows {
            let runtime = if no_runtime {
                "0".to_string()
            } else {
                format_sig17(row.runtime_ms)
            };
            writeln!(
                out,
                "{},{},{},{},{},{},{},{},{}",
                table.scheme,
                table.model,
                row.steps,
                format_sig17(row.mesh_width),
                format_sig17(row.mse),
                format_sig17(row.mse_stderr),
                format_sig17(row.rmse),
                row.paths,
                runtime,
            )?;
        }
    }
    Ok(())
}

pub fn emit_csv(tables: &[ErrorTable], no_runtime: bool, path: &Path) -> Result<(), RunError> {
    let write_err = |source| RunError::Write {
        path: path.display().to_string(),
        source,
    };
    let mut buf = Vec::new();
    write_csv(tables, no_runtime, &mut buf)?;
    fs::write(path, buf).map_err(write_err)
}

pub fn write_moment_csv<W: Write>(
    scheme: SchemeKind,
    model: &str,
    p: f64,
    paths: usize,
    estimates: &[MomentEstimate],
    out: &mut W,
) -> io::Result<()> {
    for e in estimates {
        writeln!(
            out,
            "{scheme},{model},{},{},{},{},{paths},{}",
            e.steps,
            format_sig17(p),
            format_sig17(e.moment),
            format_sig17(e.stderr),
            e.blow_ups
        )?;
    }
    Ok(())
}

fn experiment(config: &RunConfig) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::new(
        config.step_counts.clone(),
        config.paths,
        config.master_seed,
        config.ref_multiplier,
    );
    cfg.allow_noncommutative = config.allow_noncommutative;
    if config.serial {
        cfg = cfg.serial();
    }
    cfg
}

fn lookup_model(config: &RunConfig) -> SdeModel {
    builtin_model(&config.model).expect("model name validated while parsing")
}

fn deliver(config: &RunConfig, csv: Vec<u8>, stdout: &mut dyn Write) -> Result<(), RunError> {
    match &config.output {
        Some(path) => fs::write(path, csv).map_err(|source| RunError::Write {
            path: path.display().to_string(),
            source,
        }),
        None => Ok(stdout.write_all(&csv)?),
    }
}

/// Executes `config`, writing CSV to the configured output (or `stdout`)
/// and a human-readable summary to `stdout`.
pub fn run(config: &RunConfig, stdout: &mut dyn Write) -> Result<(), RunError> {
    let model = lookup_model(config);
    match config.command {
        Command::Convergence => {
            let tables = strong_error_tables(&model, &config.schemes, &experiment(config))?;
            let mut csv = Vec::new();
            write_csv(&tables, config.no_runtime, &mut csv)?;
            deliver(config, csv, stdout)?;
            writeln!(stdout, "# model {} reference {}", model.name(), tables[0].reference)?;
            for t in &tables {
                let blow_ups: usize = t.rows.iter().map(|r| r.blow_ups).sum();
                match fit_order(t) {
                    Ok(fit) => writeln!(
                        stdout,
                        "# {}: slope {:.4} (r^2 {:.4}, {} points, {} blow-ups)",
                        t.scheme, fit.slope, fit.r_squared, fit.points_used, blow_ups
                    )?,
                    Err(e) => writeln!(stdout, "# {}: no slope ({e})", t.scheme)?,
                }
            }
        }
        Command::Efficiency => {
            let tables = strong_error_tables(&model, &config.schemes, &experiment(config))?;
            let mut csv = Vec::new();
            write_csv(&tables, config.no_runtime, &mut csv)?;
            deliver(config, csv, stdout)?;
            writeln!(stdout, "# target rmse < {}", config.target_eps)?;
            for t in tables {
                let result = efficiency_from_table(t, config.target_eps);
                match &result.met {
                    Some(row) => writeln!(
                        stdout,
                        "# {}: met at N = {} (rmse {:.4e}, runtime {:.1} ms)",
                        result.scheme, row.steps, row.rmse, row.runtime_ms
                    )?,
                    None => writeln!(stdout, "# {}: unmet", result.scheme)?,
                }
            }
        }
        Command::Moments => {
            let mut csv = Vec::new();
            writeln!(csv, "{MOMENT_CSV_HEADER}")?;
            let mut summary = Vec::new();
            let execution = if config.serial {
                Execution::Serial
            } else {
                Execution::Parallel
            };
            for &scheme in &config.schemes {
                let est = moment_probe(
                    &model,
                    scheme,
                    config.moment_p,
                    &config.step_counts,
                    config.paths,
                    config.master_seed,
                    execution,
                )?;
                write_moment_csv(scheme, model.name(), config.moment_p, config.paths, &est, &mut csv)?;
                let max = est.iter().map(|e| e.moment).fold(f64::NEG_INFINITY, f64::max);
                let min = est.iter().map(|e| e.moment).fold(f64::INFINITY, f64::min);
                let blow_ups: usize = est.iter().map(|e| e.blow_ups).sum();
                summary.push(format!(
                    "# {scheme}: max/min moment ratio {:.4}, {blow_ups} blow-ups",
                    max / min
                ));
            }
            deliver(config, csv, stdout)?;
            for line in summary {
                writeln!(stdout, "{line}")?;
            }
        }
        Command::Check => {
            let comm = model.commutativity()?;
            let radius =
                2.0 * (1.0 + model.initial_state().iter().fold(0.0f64, |a, x| a.max(x.abs())));
            let report = probe_assumptions(&model, 1000, radius, config.master_seed)?;
            writeln!(
                stdout,
                "model {}: d = {}, m = {}, T = {}, xi = {:?}",
                model.name(),
                model.state_dim(),
                model.noise_dim(),
                model.horizon(),
                model.initial_state()
            )?;
            writeln!(
                stdout,
                "commutative noise: {} (max violation {:e})",
                comm.commutative, comm.max_violation
            )?;
            writeln!(
                stdout,
                "one-sided Lipschitz estimate: {:.6}",
                report.one_sided_lipschitz_estimate
            )?;
            writeln!(
                stdout,
                "diffusion Lipschitz estimate: {:.6}",
                report.diffusion_lipschitz_estimate
            )?;
            writeln!(
                stdout,
                "L-coefficient Lipschitz estimate: {:.6}",
                report.l_coefficient_lipschitz_estimate
            )?;
            writeln!(
                stdout,
                "probes: {} pairs in [-{r}, {r}]^{}",
                report.probe_count,
                model.state_dim(),
                r = report.probe_box
            )?;
        }
    }
    Ok(())
}
