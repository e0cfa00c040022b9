use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

mod commands;
mod output;

/// Operator systems of q-commuting unitaries: construction, UCP-map
/// feasibility, matrix ranges, extremality and dilation constants.
#[derive(Parser, Debug)]
#[command(name = "opsys", version, about)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    /// Build a tuple and write it as JSON.
    Construct(ConstructArgs),
    /// Canonical form of an irreducible q-commuting pair.
    Classify(ClassifyArgs),
    /// Level-1 support function on a direction fan (CSV).
    Nrange(NrangeArgs),
    /// Is a tuple of matrices in the matrix range?
    Member(MemberArgs),
    /// Support value of the matrix range at a matrix direction.
    Support(SupportArgs),
    /// Order equivalence of two tuples.
    Equiv(EquivArgs),
    /// Boundary check and one-step dilation search for given values.
    Extreme(ExtremeArgs),
    /// Climb by one-step dilations until none is found.
    Chain(ChainArgs),
    /// Dilation constant with certified error bound.
    Dilation(DilationArgs),
    /// Dilation constants for every k/n with n up to a bound (CSV).
    Butterfly(ButterflyArgs),
    /// Sampled isometry check of the transpose map on the universal pair.
    TransposeCheck(TransposeArgs),
    /// Run the acceptance suite.
    Selftest(SelftestArgs),
}

#[derive(Args, Debug, Serialize)]
pub struct OutArg {
    /// Output file; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(ValueEnum, Clone, Copy, Debug, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum TupleKind {
    /// (αU, βV) on C^n.
    Standard,
    /// Direct sum of phase-scaled pairs over a phase grid.
    Universal,
    /// The two anti-commuting Pauli matrices (X, Z).
    Pauli,
    /// Diagonal pair sampling the closed unit disk.
    Disk,
    /// Λ-commuting unitaries from strict upper angles.
    Lambda,
}

#[derive(Args, Debug, Serialize)]
pub struct ConstructArgs {
    #[arg(long, value_enum, default_value = "standard")]
    pub kind: TupleKind,
    /// Angle k/n (q = e^{2πik/n}).
    #[arg(long, default_value = "1/2")]
    pub q: String,
    /// Unimodular phases α,β, e.g. 1,1 or -1,0.6+0.8i.
    #[arg(long, default_value = "1,1")]
    pub phases: String,
    /// Phase grid per axis for the universal sample.
    #[arg(long, default_value_t = 2)]
    pub grid: usize,
    /// Minimum number of disk points.
    #[arg(long, default_value_t = 1000)]
    pub points: usize,
    /// Strict upper angles of Λ row by row, e.g. 1/2,1/3,1/5.
    #[arg(long)]
    pub lambda: Option<String>,
    #[command(flatten)]
    #[serde(flatten)]
    pub out: OutArg,
}

#[derive(Args, Debug, Serialize)]
pub struct ClassifyArgs {
    /// Tuple file.
    #[arg(long)]
    pub s: PathBuf,
    #[command(flatten)]
    #[serde(flatten)]
    pub out: OutArg,
}

#[derive(Args, Debug, Serialize)]
pub struct NrangeArgs {
    #[arg(long)]
    pub s: PathBuf,
    #[arg(long, default_value_t = 360)]
    pub directions: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    #[serde(flatten)]
    pub out: OutArg,
}

#[derive(Args, Debug, Serialize)]
pub struct MemberArgs {
    #[arg(long)]
    pub s: PathBuf,
    /// Tuple file holding the candidate matrices.
    #[arg(long)]
    pub a: PathBuf,
    #[arg(long, default_value_t = 1e-8)]
    pub tol: f64,
    #[command(flatten)]
    #[serde(flatten)]
    pub out: OutArg,
}

#[derive(Args, Debug, Serialize)]
pub struct SupportArgs {
    #[arg(long)]
    pub s: PathBuf,
    /// Tuple file holding the direction matrices B_i.
    #[arg(long)]
    pub b: PathBuf,
    #[arg(long, default_value_t = 1e-8)]
    pub tol: f64,
    #[command(flatten)]
    #[serde(flatten)]
    pub out: OutArg,
}

#[derive(ValueEnum, Clone, Copy, Debug, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum EquivLevel {
    /// Compare level-1 support functions.
    One,
    /// Two-way UCP existence.
    Complete,
}

#[derive(Args, Debug, Serialize)]
pub struct EquivArgs {
    #[arg(long)]
    pub s: PathBuf,
    #[arg(long)]
    pub r: PathBuf,
    #[arg(long, value_enum, default_value = "complete")]
    pub level: EquivLevel,
    #[arg(long, default_value_t = 1e-8)]
    pub tol: f64,
    #[arg(long, default_value_t = 360)]
    pub directions: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    #[serde(flatten)]
    pub out: OutArg,
}

#[derive(Args, Debug, Serialize)]
pub struct ExtremeArgs {
    /// Source tuple.
    #[arg(long)]
    pub s: PathBuf,
    /// Tuple file holding the values φ(s_i).
    #[arg(long)]
    pub values: PathBuf,
    /// Angle for the boundary check (taken from the source when absent).
    #[arg(long)]
    pub q: Option<String>,
    #[arg(long, default_value_t = 64)]
    pub directions: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 1e-6)]
    pub tol: f64,
    #[command(flatten)]
    #[serde(flatten)]
    pub out: OutArg,
}

#[derive(Args, Debug, Serialize)]
pub struct ChainArgs {
    #[arg(long)]
    pub s: PathBuf,
    /// Start values; a seeded exposed vector state when absent.
    #[arg(long)]
    pub start: Option<PathBuf>,
    #[arg(long, default_value_t = 6)]
    pub max_steps: usize,
    #[arg(long, default_value_t = 16)]
    pub directions: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 1e-6)]
    pub tol: f64,
    #[command(flatten)]
    #[serde(flatten)]
    pub out: OutArg,
}

#[derive(Args, Debug, Serialize)]
pub struct DilationArgs {
    /// Angle θ as k/n.
    #[arg(long)]
    pub q: String,
    /// Second angle θ'; the constant depends on θ − θ' only.
    #[arg(long)]
    pub q2: Option<String>,
    #[arg(long, default_value_t = 1e-6)]
    pub tol: f64,
    #[command(flatten)]
    #[serde(flatten)]
    pub out: OutArg,
}

#[derive(Args, Debug, Serialize)]
pub struct ButterflyArgs {
    #[arg(long, default_value_t = 8)]
    pub n_max: u64,
    #[arg(long, default_value_t = 1e-7)]
    pub tol: f64,
    #[command(flatten)]
    #[serde(flatten)]
    pub out: OutArg,
}

#[derive(Args, Debug, Serialize)]
pub struct TransposeArgs {
    #[arg(long)]
    pub q: String,
    /// Phase grid per axis.
    #[arg(long, default_value_t = 16)]
    pub grid: usize,
    #[arg(long, default_value_t = 100)]
    pub samples: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    #[serde(flatten)]
    pub out: OutArg,
}

#[derive(Args, Debug, Serialize)]
pub struct SelftestArgs {
    /// Reduced sample sizes.
    #[arg(long)]
    pub quick: bool,
    /// Override every solver tolerance (fault injection).
    #[arg(long)]
    pub inject_sdp_tol: Option<f64>,
    /// Run only these criteria (comma separated ids).
    #[arg(long, value_delimiter = ',')]
    pub only: Vec<usize>,
    #[command(flatten)]
    #[serde(flatten)]
    pub out: OutArg,
}

/// How a finished command should exit.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Verdict {
    Definitive,
    Inconclusive,
    Failed,
}

impl Verdict {
    fn code(self) -> ExitCode {
        match self {
            Verdict::Definitive => ExitCode::SUCCESS,
            Verdict::Failed => ExitCode::from(1),
            Verdict::Inconclusive => ExitCode::from(2),
        }
    }
}

fn init_threads() -> Result<(), String> {
    let Ok(v) = std::env::var("THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .map_err(|_| format!("THREADS must be a positive integer, got '{v}'"))?;
    if n == 0 {
        return Err("THREADS must be positive".into());
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| e.to_string())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(e) = init_threads() {
        eprintln!("error: {e}");
        return ExitCode::from(1);
    }
    match commands::run(&cli.command) {
        Ok(v) => v.code(),
        Err(e) => {
            eprintln!("error: {e}");
            // Solver trouble is inconclusive, everything else is an error.
            match e {
                opsys::Error::NumericalFailure(_) => ExitCode::from(2),
                _ => ExitCode::from(1),
            }
        }
    }
}
