//! Command-line flags, the optional `key=value` config file, and the
//! validated run configuration built from both.

use std::fmt;
use std::io;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use heron_core::descent::MAX_HEIGHT;
use heron_core::numtheory::parse_rational;
use heron_core::sieve::KRange;
use heron_core::{Effort, Error, Rational};

/// Overrides the directory that relative output paths resolve against.
pub const OUT_DIR_ENV: &str = "HERON_OUT_DIR";
pub const DEFAULT_OUT: &str = "scan.jsonl";

#[derive(Debug, Parser)]
#[command(name = "heron", version, about = "Elliptic curves from Heron triangles: models, torsion, rank bounds and sieve scans")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub options: Options,
}

#[derive(Debug, Clone, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Sides, area, models and discriminant for one parameter
    Construct,
    /// Torsion subgroup of one curve
    Torsion,
    /// Rank bounds by complete 2-descent
    Rank,
    /// Prime sieve score
    Sieve,
    /// Locally solvable square classes and their search results
    Descent,
    /// Sieve a parameter range and bound ranks of the best curves
    Scan,
    /// Rank distribution of an existing results file
    Report {
        /// Results file; defaults to --out
        file: Option<PathBuf>,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Construct => "construct",
            Command::Torsion => "torsion",
            Command::Rank => "rank",
            Command::Sieve => "sieve",
            Command::Descent => "descent",
            Command::Scan => "scan",
            Command::Report { .. } => "report",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, ValueEnum)]
pub enum Format {
    Jsonl,
    Csv,
    #[default]
    Pretty,
}

impl std::str::FromStr for Format {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        <Format as ValueEnum>::from_str(s, true)
    }
}

#[derive(Debug, Clone, Default, Args)]
pub struct Options {
    /// Curve parameter, an integer or fraction such as 98/625
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub k: Option<String>,
    /// Smallest parameter of a scan
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub k_min: Option<String>,
    /// Largest parameter of a scan
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub k_max: Option<String>,
    /// Largest denominator of scanned parameters
    #[arg(long, global = true)]
    pub q_max: Option<u64>,
    /// Sieve prime limit
    #[arg(long, global = true)]
    pub limit: Option<u64>,
    /// Largest numerator and denominator in the point search
    #[arg(long, global = true)]
    pub height_bound: Option<u64>,
    /// Percent of scanned curves, by sieve score, that get rank bounds
    #[arg(long, global = true)]
    pub top_fraction: Option<f64>,
    /// Search effort level; each level doubles the search height
    #[arg(long, global = true)]
    pub effort: Option<u32>,
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
    /// Results file of a scan
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Skip parameters already in the results file
    #[arg(long, global = true)]
    pub resume: bool,
    /// Exit with status 3 unless every rank is determined
    #[arg(long, global = true)]
    pub require_determined: bool,
    /// Worker threads
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Record per-phase timings in scan output
    #[arg(long, global = true)]
    pub timings: bool,
    /// Parameter that always gets rank bounds in a scan; repeatable
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub pin: Vec<String>,
    /// File of key=value lines; flags take precedence
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
}

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Core(Error),
    Io(io::Error),
    Policy(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Core(e) => match e {
                Error::SingularParameter(_)
                | Error::InvalidInput(_)
                | Error::NotASquare(_)
                | Error::PointNotOnCurve
                | Error::SingularModel
                | Error::NotSplit
                | Error::EmptyInput => 2,
                _ => 1,
            },
            CliError::Io(_) => 1,
            CliError::Policy(_) => 3,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage: {m}"),
            CliError::Core(Error::SingularParameter(k)) => write!(f, "singular parameter k = {k}"),
            CliError::Core(e) => write!(f, "{e}"),
            CliError::Io(e) => write!(f, "i/o: {e}"),
            CliError::Policy(m) => write!(f, "{m}"),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Core(e)
    }
}

impl From<io::Error> for CliError {
    fn from(e: io::Error) -> Self {
        CliError::Io(e)
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Io(io::Error::other(e))
    }
}

pub type CliResult<T> = Result<T, CliError>;

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

fn parse_value<T: std::str::FromStr>(key: &str, value: &str) -> CliResult<T> {
    value
        .parse()
        .map_err(|_| usage(format!("invalid value {value:?} for {key}")))
}

fn parse_bool(key: &str, value: &str) -> CliResult<bool> {
    match value {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(usage(format!("invalid value {value:?} for {key}"))),
    }
}

impl Options {
    /// Fills unset options from `key=value` lines. Blank lines and lines
    /// starting with `#` are ignored.
    pub fn merge_file(&mut self, text: &str) -> CliResult<()> {
        for (n, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| usage(format!("config line {}: expected key=value", n + 1)))?;
            let (key, value) = (key.trim(), value.trim());
            macro_rules! fill {
                ($field:ident) => {
                    if self.$field.is_none() {
                        self.$field = Some(parse_value(key, value)?);
                    }
                };
            }
            match key {
                "k" => fill!(k),
                "k-min" => fill!(k_min),
                "k-max" => fill!(k_max),
                "q-max" => fill!(q_max),
                "limit" => fill!(limit),
                "height-bound" => fill!(height_bound),
                "top-fraction" => fill!(top_fraction),
                "effort" => fill!(effort),
                "format" => fill!(format),
                "out" => fill!(out),
                "threads" => fill!(threads),
                "resume" => self.resume |= parse_bool(key, value)?,
                "require-determined" => self.require_determined |= parse_bool(key, value)?,
                "timings" => self.timings |= parse_bool(key, value)?,
                "pin" => {
                    if self.pin.is_empty() {
                        self.pin = value.split(',').map(|s| s.trim().to_string()).collect();
                    }
                }
                _ => return Err(usage(format!("config line {}: unknown key {key:?}", n + 1))),
            }
        }
        Ok(())
    }
}

/// Everything a command needs, checked before any computation.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub command: Command,
    pub k: Option<Rational>,
    pub range: Option<KRange>,
    pub limit: u64,
    pub effort: Effort,
    pub top_fraction: f64,
    pub format: Format,
    pub out: PathBuf,
    pub resume: bool,
    pub require_determined: bool,
    pub threads: Option<usize>,
    pub timings: bool,
    pub pinned: Vec<Rational>,
}

fn parse_k(flag: &str, s: &str) -> CliResult<Rational> {
    parse_rational(s).map_err(|_| usage(format!("--{flag} expects an integer or fraction, got {s:?}")))
}

/// Resolves a relative output path against the override directory.
pub fn resolve_out(path: &Path, out_dir: Option<&Path>) -> PathBuf {
    match out_dir {
        Some(dir) if path.is_relative() => dir.join(path),
        _ => path.to_path_buf(),
    }
}

impl RunConfig {
    pub fn from_cli(cli: Cli, out_dir: Option<&Path>) -> CliResult<Self> {
        let Cli { command, mut options } = cli;
        if let Some(path) = options.config.clone() {
            let text = std::fs::read_to_string(&path)
                .map_err(|e| usage(format!("cannot read config {}: {e}", path.display())))?;
            options.merge_file(&text)?;
        }
        Self::validate(command, options, out_dir)
    }

    pub fn validate(command: Command, o: Options, out_dir: Option<&Path>) -> CliResult<Self> {
        let name = command.name();
        let single = matches!(
            command,
            Command::Construct | Command::Torsion | Command::Rank | Command::Sieve | Command::Descent
        );
        let reject = |present: bool, flag: &str| -> CliResult<()> {
            if present {
                Err(usage(format!("--{flag} does not apply to {name}")))
            } else {
                Ok(())
            }
        };
        let range_flags = o.k_min.is_some() || o.k_max.is_some() || o.q_max.is_some();
        let scan_flags = o.top_fraction.is_some() || o.resume || o.timings || !o.pin.is_empty();
        let search_flags = o.effort.is_some() || o.height_bound.is_some();

        let k = if single {
            reject(range_flags, "k-min/--k-max/--q-max")?;
            reject(scan_flags, "top-fraction/--resume/--timings/--pin")?;
            let s = o.k.as_deref().ok_or_else(|| usage(format!("{name} needs --k")))?;
            Some(parse_k("k", s)?)
        } else {
            reject(o.k.is_some(), "k")?;
            None
        };
        if matches!(command, Command::Construct | Command::Torsion | Command::Sieve) {
            reject(search_flags, "effort/--height-bound")?;
            reject(o.require_determined, "require-determined")?;
        }
        if !matches!(command, Command::Sieve | Command::Scan) {
            reject(o.limit.is_some(), "limit")?;
        }
        if let Command::Report { .. } = command {
            reject(range_flags || scan_flags || search_flags, "scan options")?;
        }

        let range = if command == Command::Scan {
            let lo = parse_k("k-min", o.k_min.as_deref().unwrap_or("3"))?;
            let hi = parse_k("k-max", o.k_max.as_deref().unwrap_or("50"))?;
            let q_max = o.q_max.unwrap_or(1);
            if q_max == 0 {
                return Err(usage("--q-max must be at least 1"));
            }
            if lo > hi {
                return Err(usage(format!("--k-min {lo} exceeds --k-max {hi}")));
            }
            Some(KRange { lo, hi, q_max })
        } else {
            None
        };

        let limit = o.limit.unwrap_or(10_000);
        if limit < 2 {
            return Err(usage("--limit must be at least 2"));
        }
        let top_fraction = o.top_fraction.unwrap_or(1.0);
        if !(0.0..=100.0).contains(&top_fraction) {
            return Err(usage("--top-fraction is a percentage in [0, 100]"));
        }
        let mut effort = Effort::level(o.effort.unwrap_or(0));
        if let Some(h) = o.height_bound {
            if h == 0 || h > MAX_HEIGHT {
                return Err(usage(format!("--height-bound must be in 1..={MAX_HEIGHT}")));
            }
            effort = Effort::with_height(h);
        }
        if o.threads == Some(0) {
            return Err(usage("--threads must be at least 1"));
        }
        let pinned = o.pin.iter().map(|s| parse_k("pin", s)).collect::<CliResult<Vec<_>>>()?;
        let out = match (&command, o.out) {
            (Command::Report { file: Some(f) }, _) => f.clone(),
            (_, Some(p)) => resolve_out(&p, out_dir),
            (_, None) => resolve_out(Path::new(DEFAULT_OUT), out_dir),
        };

        Ok(RunConfig {
            command,
            k,
            range,
            limit,
            effort,
            top_fraction,
            format: o.format.unwrap_or_default(),
            out,
            resume: o.resume,
            require_determined: o.require_determined,
            threads: o.threads,
            timings: o.timings,
            pinned,
        })
    }
}
