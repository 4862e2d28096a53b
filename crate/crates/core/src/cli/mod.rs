//! Command-line front end. Every command writes its report into `--out` and
//! returns an exit code: 0 success, 2 configuration error, 3 incomplete
//! system, 4 failed check, 1 anything else.

mod commands;
pub mod config;
pub mod output;

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::error::JopError;
use config::{Overrides, Problem, ProblemConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_OTHER: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_INCOMPLETE: i32 = 3;
pub const EXIT_CHECK: i32 = 4;

#[derive(Debug, Parser)]
#[command(name = "jop", version, about = "Jointly orthogonal polynomial systems")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve for the joint system of degree n.
    Solve(CommonArgs),
    /// Re-check a stored system against its problem.
    Verify(VerifyArgs),
    /// Degree-by-degree rank-one Gram–Schmidt up to degree n.
    Gs(CommonArgs),
    /// Run a classical preset and its operator checks.
    Classical(CommonArgs),
    /// Enumerate the closed-form roots-of-unity problem.
    AppendixB(CommonArgs),
    /// Write the members (and eigenfunctions for presets) on a grid as CSV.
    Plotdata(PlotArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Clone, Args)]
pub struct CommonArgs {
    /// Problem file (TOML, or JSON with a .json extension).
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub k: Option<usize>,
    /// One of heun, lame, ince, sextic, heine-stieltjes.
    #[arg(long)]
    pub preset: Option<String>,
}

#[derive(Debug, Clone, Args)]
pub struct VerifyArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Stored system; defaults to `<out>/system.json`.
    #[arg(long)]
    pub system: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct PlotArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Grid points per interval.
    #[arg(long, default_value_t = 101)]
    pub points: usize,
}

/// Failure with the exit code it maps to.
#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub message: String,
}

impl From<JopError> for Failure {
    fn from(e: JopError) -> Self {
        let code = match e {
            JopError::InvalidConfig(_)
            | JopError::OverlappingIntervals { .. }
            | JopError::NonIntegrable(_)
            | JopError::InsufficientMoments { .. }
            | JopError::IndexOutOfRange { .. }
            | JopError::UnsupportedDimension(_)
            | JopError::NotK2(_)
            | JopError::DuplicateRoots => EXIT_CONFIG,
            JopError::IncompleteSystem { .. } | JopError::ConvergenceFailure(_) => EXIT_INCOMPLETE,
            JopError::DivisionRemainder(_) | JopError::ComplexEigenvalues { .. } => EXIT_CHECK,
            _ => EXIT_OTHER,
        };
        Failure { code, message: e.to_string() }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure { code: EXIT_OTHER, message: e.to_string() }
    }
}

pub(crate) type CmdResult = std::result::Result<i32, Failure>;

impl CommonArgs {
    fn load_config(&self) -> std::result::Result<ProblemConfig, Failure> {
        match &self.config {
            Some(p) => Ok(ProblemConfig::load(p)?),
            None => Ok(ProblemConfig::default()),
        }
    }

    fn out_dir(&self, cfg: Option<&ProblemConfig>) -> PathBuf {
        self.out
            .clone()
            .or_else(|| cfg.and_then(|c| c.output.dir.clone()).map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from("jop-out"))
    }

    fn format(&self, cfg: &ProblemConfig) -> std::result::Result<Format, Failure> {
        if let Some(f) = self.format {
            return Ok(f);
        }
        match cfg.output.format.as_deref() {
            None | Some("json") => Ok(Format::Json),
            Some("csv") => Ok(Format::Csv),
            Some(other) => Err(Failure { code: EXIT_CONFIG, message: format!("unknown format {other:?}") }),
        }
    }

    fn overrides(&self) -> Overrides {
        Overrides { n: self.n, k: self.k, seed: self.seed, preset: self.preset.clone() }
    }

    fn problem(&self, cfg: &ProblemConfig) -> std::result::Result<Problem, Failure> {
        Ok(Problem::resolve(cfg, &self.overrides())?)
    }
}

fn write_report(dir: &Path, name: &str, text: &str) {
    if std::fs::create_dir_all(dir).and_then(|_| std::fs::write(dir.join(name), text)).is_err() {
        log::error!("cannot write {}", dir.join(name).display());
    }
}

/// Runs one command, writes the report file on every outcome and returns the
/// exit code.
pub fn run(cli: Cli) -> i32 {
    let (common, report) = match &cli.command {
        Command::Solve(c) | Command::Gs(c) | Command::Classical(c) | Command::AppendixB(c) => {
            (c, report_name(&cli.command))
        }
        Command::Verify(v) => (&v.common, report_name(&cli.command)),
        Command::Plotdata(p) => (&p.common, report_name(&cli.command)),
    };
    let cfg = common.load_config();
    let dir = common.out_dir(cfg.as_ref().ok());
    let result = cfg.and_then(|cfg| match &cli.command {
        Command::Solve(c) => commands::solve(c, &cfg, &dir),
        Command::Verify(v) => commands::verify(v, &cfg, &dir),
        Command::Gs(c) => commands::gs(c, &cfg, &dir),
        Command::Classical(c) => commands::classical(c, &cfg, &dir),
        Command::AppendixB(c) => commands::appendix_b(c, &cfg, &dir),
        Command::Plotdata(p) => commands::plotdata(p, &cfg, &dir),
    });
    match result {
        Ok(code) => code,
        Err(f) => {
            eprintln!("error: {}", f.message);
            write_report(&dir, report, &format!("error: {}\nexit code {}\n", f.message, f.code));
            f.code
        }
    }
}

fn report_name(cmd: &Command) -> &'static str {
    match cmd {
        Command::Solve(_) => "report.txt",
        Command::Verify(_) => "verify.txt",
        Command::Gs(_) => "gs.txt",
        Command::Classical(_) => "classical.txt",
        Command::AppendixB(_) => "appendix_b.txt",
        Command::Plotdata(_) => "plot.txt",
    }
}

/// Parses `args` (program name first) and runs.
pub fn run_from<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    match Cli::try_parse_from(args) {
        Ok(cli) => run(cli),
        Err(e) => {
            let _ = e.print();
            if e.use_stderr() {
                EXIT_CONFIG
            } else {
                EXIT_OK
            }
        }
    }
}
