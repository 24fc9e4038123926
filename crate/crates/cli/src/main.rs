//! `nmibs`: band selection, classification and evaluation from the shell.
//!
//! Exit codes: 0 on success, 1 on a runtime failure, 2 on a usage error.
//! Every failure names the stage that produced it.

mod commands;

use std::fmt;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use nmibs::selection::Method;

#[derive(Debug, Parser)]
#[command(name = "nmibs", version, about = "Hyperspectral band selection and RBF-SVM validation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Select bands and write the selection report(s).
    Select(SelectArgs),
    /// Select, train, classify the scene and score the test pixels.
    Pipeline(PipelineArgs),
    /// Score a classified map against a ground-truth raster.
    Eval(EvalArgs),
    /// Write the built-in synthetic cubes to disk.
    Fixtures(FixtureArgs),
}

/// A cube is read either from an ENVI header/raw/ground-truth triple or from
/// a single pixel CSV whose last column is the label.
#[derive(Debug, Args)]
#[group(required = true, multiple = true)]
struct InputArgs {
    /// ENVI header of the cube.
    #[arg(long, requires_all = ["raw", "gt"])]
    header: Option<PathBuf>,
    /// Band-sequential payload of the cube.
    #[arg(long, requires = "header")]
    raw: Option<PathBuf>,
    /// Ground-truth raster: one u16 label per pixel, 0 = unlabeled.
    #[arg(long, requires = "header")]
    gt: Option<PathBuf>,
    /// Pixel CSV: one row per pixel, band values then label.
    #[arg(long, conflicts_with_all = ["header", "raw", "gt"])]
    csv: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum MethodArg {
    Nmibs,
    Mim,
    Mrmr,
    All,
}

impl MethodArg {
    fn expand(self) -> Vec<Method> {
        match self {
            MethodArg::Nmibs => vec![Method::Nmibs],
            MethodArg::Mim => vec![Method::Mim],
            MethodArg::Mrmr => vec![Method::Mrmr],
            MethodArg::All => Method::ALL.to_vec(),
        }
    }
}

#[derive(Debug, Args)]
struct SelectionFlags {
    #[arg(long, value_enum, default_value_t = MethodArg::Nmibs)]
    method: MethodArg,
    /// Minimum score gain for a band to be accepted.
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    th: f64,
    /// Quantization levels per band.
    #[arg(long, default_value_t = nmibs::infotheory::DEFAULT_BINS, value_parser = at_least_two)]
    bins: usize,
    /// Cap on candidate evaluations (default: bands - 1).
    #[arg(long)]
    max_iterations: Option<usize>,
}

#[derive(Debug, Args)]
struct OutputArgs {
    /// Output directory, created if missing.
    #[arg(long = "out", env = "NMIBS_OUTPUT_DIR", default_value = ".")]
    dir: PathBuf,
}

#[derive(Debug, Args)]
struct SelectArgs {
    #[command(flatten)]
    input: InputArgs,
    #[command(flatten)]
    selection: SelectionFlags,
    /// Number of bands to select.
    #[arg(long, value_parser = positive)]
    k: usize,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Debug, Args)]
struct PipelineArgs {
    #[command(flatten)]
    input: InputArgs,
    #[command(flatten)]
    selection: SelectionFlags,
    /// Band counts to select, comma separated.
    #[arg(long, required = true, value_delimiter = ',', value_parser = positive)]
    k: Vec<usize>,
    /// Training fractions, comma separated, each in (0, 1).
    #[arg(long, value_delimiter = ',', default_value = "0.1,0.25,0.5", value_parser = fraction)]
    fractions: Vec<f64>,
    /// Seed for the train/test split and SMO visiting order.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Also classify with every band.
    #[arg(long)]
    baseline: bool,
    /// SVM box constraint.
    #[arg(long, default_value_t = nmibs::svm::KernelParams::DEFAULT_C)]
    c: f64,
    /// RBF width (default: 1 / band count).
    #[arg(long)]
    gamma: Option<f64>,
    /// SMO KKT tolerance.
    #[arg(long, default_value_t = nmibs::svm::KernelParams::DEFAULT_TOLERANCE)]
    tolerance: f64,
    /// Sweeps without progress before SMO stops.
    #[arg(long, default_value_t = nmibs::svm::KernelParams::DEFAULT_MAX_PASSES)]
    max_passes: usize,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Debug, Args)]
struct EvalArgs {
    /// Classified map as `row,col,label` CSV.
    #[arg(long)]
    map: PathBuf,
    /// Ground-truth raster.
    #[arg(long, requires = "header", required_unless_present = "csv")]
    gt: Option<PathBuf>,
    /// ENVI header giving the raster geometry.
    #[arg(long, requires = "gt")]
    header: Option<PathBuf>,
    /// Pixel CSV supplying geometry and labels instead of `--gt`/`--header`.
    #[arg(long, conflicts_with_all = ["gt", "header"])]
    csv: Option<PathBuf>,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum FixtureKind {
    Planted,
    Trend,
    Duplicated,
    All,
}

#[derive(Debug, Args)]
struct FixtureArgs {
    #[arg(long, value_enum, default_value_t = FixtureKind::All)]
    kind: FixtureKind,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    output: OutputArgs,
}

fn positive(s: &str) -> Result<usize, String> {
    match s.parse::<usize>() {
        Ok(0) => Err("must be at least 1".into()),
        Ok(v) => Ok(v),
        Err(e) => Err(e.to_string()),
    }
}

fn at_least_two(s: &str) -> Result<usize, String> {
    match s.parse::<usize>() {
        Ok(v) if v >= 2 => Ok(v),
        Ok(_) => Err("must be at least 2".into()),
        Err(e) => Err(e.to_string()),
    }
}

fn fraction(s: &str) -> Result<f64, String> {
    match s.parse::<f64>() {
        Ok(v) if v > 0.0 && v < 1.0 => Ok(v),
        Ok(v) => Err(format!("{v} is not in (0, 1)")),
        Err(e) => Err(e.to_string()),
    }
}

/// A failed command: the stage that failed, why, and the exit code.
#[derive(Debug)]
pub struct Failure {
    stage: &'static str,
    message: String,
    code: u8,
}

impl Failure {
    pub fn usage(stage: &'static str, message: impl Into<String>) -> Self {
        Failure {
            stage,
            message: message.into(),
            code: 2,
        }
    }

    pub fn runtime(stage: &'static str, message: impl Into<String>) -> Self {
        Failure {
            stage,
            message: message.into(),
            code: 1,
        }
    }

    /// Marks the failure as caused by inconsistent inputs.
    pub fn as_usage(mut self) -> Self {
        self.code = 2;
        self
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} stage failed: {}", self.stage, self.message)
    }
}

impl From<nmibs::Error> for Failure {
    fn from(err: nmibs::Error) -> Self {
        use nmibs::datacube::DataError;
        use nmibs::selection::SelectionError;
        use nmibs::svm::SvmError;

        let usage = matches!(
            &err,
            nmibs::Error::Selection(SelectionError::Config(_))
                | nmibs::Error::Svm(SvmError::InvalidParams(_))
                | nmibs::Error::Data(DataError::DimensionMismatch { .. })
        );
        let message = std::error::Error::source(&err).map_or_else(|| err.to_string(), ToString::to_string);
        Failure {
            stage: err.stage(),
            message,
            code: if usage { 2 } else { 1 },
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if e.use_stderr() => {
            let _ = e.print();
            eprintln!("nmibs: arguments stage failed");
            return ExitCode::from(2);
        }
        Err(e) => e.exit(),
    };
    let outcome = match cli.command {
        Command::Select(args) => commands::select(args),
        Command::Pipeline(args) => commands::pipeline(args),
        Command::Eval(args) => commands::eval(args),
        Command::Fixtures(args) => commands::fixtures(args),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            eprintln!("nmibs: {failure}");
            ExitCode::from(failure.code)
        }
    }
}
