//! Command-line front end for `glmshap`: reads a CSV file, runs the Shapley
//! decomposition and writes reports.

use std::collections::BTreeMap;
use std::fmt;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use glmshap::data::{encode_dataset, FactorPolicy, PlayerSpec, RawTable};
use glmshap::engine::{analyze, shapley_sampled, AnalysisOptions, SamplingOptions};
use glmshap::glm::FitControl;
use glmshap::hurdle::{analyze_hurdle, HurdleSpec};
use glmshap::report::{write_cache_csv, ReportDocument};
use glmshap::rootogram::{glm_rootogram, hurdle_rootogram};
use glmshap::{Dataset, ErrorKind, Family, FitMeasure, NullConvention};

#[derive(Debug, Parser)]
#[command(
    name = "glmshap",
    version,
    about = "Shapley decomposition of GLM goodness of fit"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit every regressor subset and report Shapley values.
    Analyze(RunArgs),
    /// Export observed and expected count frequencies of the full model.
    Rootogram(RunArgs),
}

#[derive(Debug, Clone, Default, Args)]
pub struct RunArgs {
    /// Flat `key = value` file; command-line flags take precedence.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// CSV file with a header row.
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Field delimiter of the data file.
    #[arg(long)]
    pub delimiter: Option<char>,
    /// Response column.
    #[arg(long)]
    pub response: Option<String>,
    /// Comma-separated players; `name=col1+col2` groups columns. Defaults to every non-response column.
    #[arg(long)]
    pub players: Option<String>,
    /// Columns to encode as categorical even if numeric.
    #[arg(long)]
    pub factors: Option<String>,
    /// gaussian, logit, poisson, zt-poisson or geometric.
    #[arg(long)]
    pub family: Option<String>,
    /// Comma-separated measures: kl-r2, mcfadden-r2, loglik, shifted-loglik.
    #[arg(long)]
    pub measure: Option<String>,
    /// Null model of the zt-poisson family: ml or plugin.
    #[arg(long)]
    pub null: Option<String>,
    /// Poisson hurdle model: logit part plus zero-truncated Poisson part.
    #[arg(long)]
    pub hurdle: bool,
    /// Players of the hurdle's binary part (default: all players).
    #[arg(long)]
    pub binary_players: Option<String>,
    /// Players of the hurdle's count part (default: all players).
    #[arg(long)]
    pub count_players: Option<String>,
    /// Estimate Shapley values from this many random orderings instead of exact enumeration.
    #[arg(long)]
    pub mc_samples: Option<usize>,
    /// Seed of the ordering sampler.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads (default: available parallelism).
    #[arg(long)]
    pub workers: Option<usize>,
    /// Newton iteration limit per fit.
    #[arg(long)]
    pub max_iter: Option<usize>,
    /// Relative log-likelihood convergence tolerance.
    #[arg(long)]
    pub tol: Option<f64>,
    /// Use the best iterate of a non-converged fit instead of failing.
    #[arg(long)]
    pub permissive: bool,
    /// Write the JSON report (or rootogram) here.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Write per-subset statistics as CSV here.
    #[arg(long)]
    pub cache_out: Option<PathBuf>,
    /// Include per-subset statistics in the JSON report.
    #[arg(long)]
    pub include_subsets: bool,
}

/// Failure with the process exit status it maps to.
#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    pub fn config(message: impl Into<String>) -> CliError {
        CliError {
            code: 2,
            message: message.into(),
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl From<glmshap::Error> for CliError {
    fn from(e: glmshap::Error) -> CliError {
        let code = match e.kind() {
            ErrorKind::Config => 2,
            ErrorKind::Data => 3,
            ErrorKind::Numerical => 4,
        };
        let mut message = e.to_string();
        if let Some(key) = e.failing_subset() {
            message.push_str(&format!(" [failing subset key {}]", key.0));
        }
        CliError { code, message }
    }
}

type CliResult<T> = Result<T, CliError>;

/// Fully resolved settings of one run; echoed into the report.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub data: PathBuf,
    pub delimiter: char,
    pub response: String,
    pub players: Option<String>,
    pub factors: Vec<String>,
    pub family: Option<Family>,
    pub measures: Vec<FitMeasure>,
    pub null: NullConvention,
    pub hurdle: bool,
    pub binary_players: Vec<String>,
    pub count_players: Vec<String>,
    pub mc_samples: Option<usize>,
    pub seed: u64,
    pub workers: Option<usize>,
    pub control: FitControl,
    pub permissive: bool,
    pub out: Option<PathBuf>,
    pub cache_out: Option<PathBuf>,
    pub include_subsets: bool,
}

/// Parses a flat `key = value` file. Blank lines and `#` comments are
/// skipped; keys may use `-` or `_`.
pub fn parse_config_file(text: &str) -> CliResult<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for (no, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| {
            CliError::config(format!("config line {}: expected `key = value`", no + 1))
        })?;
        let v = v.trim().trim_matches('"');
        out.insert(k.trim().replace('_', "-"), v.to_string());
    }
    Ok(out)
}

fn parse_value<T: std::str::FromStr>(key: &str, v: &str) -> CliResult<T> {
    v.parse()
        .map_err(|_| CliError::config(format!("config: invalid value `{v}` for `{key}`")))
}

fn parse_bool(key: &str, v: &str) -> CliResult<bool> {
    match v.to_ascii_lowercase().as_str() {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(CliError::config(format!(
            "config: invalid boolean `{v}` for `{key}`"
        ))),
    }
}

/// Fills unset flags from the config file.
fn merge_config(mut args: RunArgs, file: &BTreeMap<String, String>) -> CliResult<RunArgs> {
    for (k, v) in file {
        let key = k.as_str();
        match key {
            "data" => args.data = args.data.or_else(|| Some(PathBuf::from(v))),
            "delimiter" => {
                if args.delimiter.is_none() {
                    args.delimiter = Some(match v.as_str() {
                        "tab" | "\\t" => '\t',
                        _ => parse_value(key, v)?,
                    });
                }
            }
            "response" => args.response = args.response.or_else(|| Some(v.clone())),
            "players" => args.players = args.players.or_else(|| Some(v.clone())),
            "factors" => args.factors = args.factors.or_else(|| Some(v.clone())),
            "family" => args.family = args.family.or_else(|| Some(v.clone())),
            "measure" | "measures" => args.measure = args.measure.or_else(|| Some(v.clone())),
            "null" => args.null = args.null.or_else(|| Some(v.clone())),
            "hurdle" => args.hurdle |= parse_bool(key, v)?,
            "binary-players" => {
                args.binary_players = args.binary_players.or_else(|| Some(v.clone()))
            }
            "count-players" => args.count_players = args.count_players.or_else(|| Some(v.clone())),
            "mc-samples" => {
                if args.mc_samples.is_none() {
                    args.mc_samples = Some(parse_value(key, v)?);
                }
            }
            "seed" => {
                if args.seed.is_none() {
                    args.seed = Some(parse_value(key, v)?);
                }
            }
            "workers" => {
                if args.workers.is_none() {
                    args.workers = Some(parse_value(key, v)?);
                }
            }
            "max-iter" => {
                if args.max_iter.is_none() {
                    args.max_iter = Some(parse_value(key, v)?);
                }
            }
            "tol" => {
                if args.tol.is_none() {
                    args.tol = Some(parse_value(key, v)?);
                }
            }
            "permissive" => args.permissive |= parse_bool(key, v)?,
            "out" => args.out = args.out.or_else(|| Some(PathBuf::from(v))),
            "cache-out" => args.cache_out = args.cache_out.or_else(|| Some(PathBuf::from(v))),
            "include-subsets" => args.include_subsets |= parse_bool(key, v)?,
            _ => return Err(CliError::config(format!("config: unknown key `{k}`"))),
        }
    }
    Ok(args)
}

fn split_list(s: &Option<String>) -> Vec<String> {
    s.as_deref()
        .unwrap_or("")
        .split(',')
        .map(str::trim)
        .filter(|x| !x.is_empty())
        .map(str::to_string)
        .collect()
}

impl RunConfig {
    pub fn resolve(args: RunArgs) -> CliResult<RunConfig> {
        let args = match &args.config {
            Some(path) => {
                let text = fs::read_to_string(path).map_err(|e| {
                    CliError::config(format!("cannot read config {}: {e}", path.display()))
                })?;
                merge_config(args.clone(), &parse_config_file(&text)?)?
            }
            None => args,
        };
        let data = args
            .data
            .ok_or_else(|| CliError::config("--data is required"))?;
        let response = args
            .response
            .ok_or_else(|| CliError::config("--response is required"))?;
        let delimiter = args.delimiter.unwrap_or(',');
        if !delimiter.is_ascii() {
            return Err(CliError::config(
                "--delimiter must be a single ASCII character",
            ));
        }
        let family = args
            .family
            .as_deref()
            .map(str::parse::<Family>)
            .transpose()?;
        if args.hurdle && family.is_some_and(|f| f != Family::Poisson) {
            return Err(CliError::config(
                "--hurdle fits a Poisson hurdle model; drop --family or use poisson",
            ));
        }
        if !args.hurdle && family.is_none() {
            return Err(CliError::config(
                "--family is required unless --hurdle is given",
            ));
        }
        if !args.hurdle && (args.binary_players.is_some() || args.count_players.is_some()) {
            return Err(CliError::config(
                "--binary-players and --count-players need --hurdle",
            ));
        }
        let measures = match &args.measure {
            Some(s) => FitMeasure::parse_list(s)?,
            None => vec![FitMeasure::KlR2],
        };
        let null = args
            .null
            .as_deref()
            .map(str::parse)
            .transpose()?
            .unwrap_or_default();
        if args.mc_samples == Some(0) {
            return Err(CliError::config("--mc-samples must be positive"));
        }
        if args.hurdle && args.mc_samples.is_some() {
            return Err(CliError::config(
                "--mc-samples is not available for hurdle runs",
            ));
        }
        if args.workers == Some(0) {
            return Err(CliError::config("--workers must be at least 1"));
        }
        let mut control = FitControl::default();
        if let Some(m) = args.max_iter {
            control.max_iter = m;
        }
        if let Some(t) = args.tol {
            control.tol = t;
        }
        control.validate()?;
        Ok(RunConfig {
            data,
            delimiter,
            response,
            players: args.players,
            factors: split_list(&args.factors),
            family,
            measures,
            null,
            hurdle: args.hurdle,
            binary_players: split_list(&args.binary_players),
            count_players: split_list(&args.count_players),
            mc_samples: args.mc_samples,
            seed: args.seed.unwrap_or(0),
            workers: args.workers,
            control,
            permissive: args.permissive,
            out: args.out,
            cache_out: args.cache_out,
            include_subsets: args.include_subsets,
        })
    }

    fn options(&self) -> AnalysisOptions {
        AnalysisOptions {
            measures: self.measures.clone(),
            null: self.null,
            control: self.control,
            workers: self.workers,
            permissive: self.permissive,
        }
    }

    fn hurdle_spec(&self) -> HurdleSpec {
        HurdleSpec {
            binary_players: self.binary_players.clone(),
            count_players: self.count_players.clone(),
        }
    }

    pub fn load_dataset(&self) -> CliResult<Dataset> {
        let raw = RawTable::from_path(&self.data, self.delimiter as u8)?;
        let specs = match &self.players {
            Some(s) => PlayerSpec::parse_list(s)?,
            None => raw
                .headers
                .iter()
                .filter(|h| **h != self.response)
                .map(|h| PlayerSpec::single(h.clone()))
                .collect(),
        };
        if specs.is_empty() {
            return Err(CliError::config("no players given"));
        }
        let policy = FactorPolicy {
            force_categorical: self.factors.iter().cloned().collect(),
        };
        Ok(encode_dataset(&raw, &self.response, &specs, &policy)?)
    }
}

fn write_file(
    path: &Path,
    write: impl FnOnce(&mut BufWriter<File>) -> glmshap::Result<()>,
) -> CliResult<()> {
    let file = File::create(path).map_err(|e| CliError {
        code: 3,
        message: format!("cannot create {}: {e}", path.display()),
    })?;
    let mut w = BufWriter::new(file);
    write(&mut w)?;
    w.flush().map_err(glmshap::Error::from)?;
    Ok(())
}

/// Runs `analyze`: returns the report and writes the requested files.
pub fn cmd_analyze(cfg: &RunConfig) -> CliResult<ReportDocument> {
    let start = Instant::now();
    let ds = cfg.load_dataset()?;
    let echo = serde_json::to_value(cfg).map_err(glmshap::Error::from)?;
    let opts = cfg.options();
    let (doc, parts) = if cfg.hurdle {
        let rep = analyze_hurdle(&ds, &cfg.hurdle_spec(), &opts)?;
        let doc = ReportDocument::hurdle(echo, &rep, cfg.include_subsets, 0.0)?;
        (doc, vec![("binary", rep.binary), ("count", rep.count)])
    } else {
        let family = cfg.family.expect("resolved config has a family");
        let a = match cfg.mc_samples {
            Some(samples) => shapley_sampled(
                &ds,
                family,
                &opts,
                &SamplingOptions {
                    samples,
                    seed: cfg.seed,
                    exhaustive_when_covered: false,
                },
            )?,
            None => analyze(&ds, family, &opts)?,
        };
        let doc = ReportDocument::single(echo, &a, cfg.include_subsets, 0.0)?;
        (doc, vec![("model", a)])
    };
    if let Some(path) = &cfg.cache_out {
        let refs: Vec<(&str, &glmshap::Analysis)> = parts.iter().map(|(n, a)| (*n, a)).collect();
        write_file(path, |w| write_cache_csv(w, &refs))?;
    }
    let doc = ReportDocument {
        elapsed_seconds: start.elapsed().as_secs_f64(),
        ..doc
    };
    if let Some(path) = &cfg.out {
        let json = doc.to_json()?;
        write_file(path, |w| Ok(w.write_all(json.as_bytes())?))?;
    }
    Ok(doc)
}

/// Runs `rootogram` and returns the JSON text.
pub fn cmd_rootogram(cfg: &RunConfig) -> CliResult<String> {
    let ds = cfg.load_dataset()?;
    let r = if cfg.hurdle {
        hurdle_rootogram(&ds, &cfg.hurdle_spec(), &cfg.control)?
    } else {
        glm_rootogram(
            &ds,
            cfg.family.expect("resolved config has a family"),
            &cfg.control,
        )?
    };
    let json = serde_json::to_string_pretty(&r).map_err(glmshap::Error::from)?;
    if let Some(path) = &cfg.out {
        write_file(path, |w| Ok(w.write_all(json.as_bytes())?))?;
    }
    Ok(json)
}

/// Dispatches a parsed command line; text output goes to `stdout`.
pub fn run(cli: Cli, stdout: &mut impl Write) -> CliResult<()> {
    let io = |e: std::io::Error| CliError::from(glmshap::Error::from(e));
    match cli.command {
        Command::Analyze(args) => {
            let cfg = RunConfig::resolve(args)?;
            let doc = cmd_analyze(&cfg)?;
            stdout.write_all(doc.render_text().as_bytes()).map_err(io)?;
        }
        Command::Rootogram(args) => {
            let cfg = RunConfig::resolve(args)?;
            let json = cmd_rootogram(&cfg)?;
            if cfg.out.is_none() {
                writeln!(stdout, "{json}").map_err(io)?;
            }
        }
    }
    Ok(())
}
