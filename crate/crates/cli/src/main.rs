//! `permx`: command-line front end for permanental vectors, bounds and Levy kernels.

mod commands;
mod io;

use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use io::CliError;

#[derive(Parser, Debug)]
#[command(name = "permx", version, about = "Alpha-permanental vectors with M-matrix kernels")]
struct Cli {
    /// Worker threads for parallel sections.
    #[arg(long, global = true, env = "PERMX_WORKERS")]
    workers: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Alpha-permanent of a small matrix.
    Permanent(PermanentArgs),
    /// Laplace transform of a permanental vector.
    Laplace(LaplaceArgs),
    /// Enumerated law of the mixing index.
    ZDist(ZDistArgs),
    /// Exact draws, optionally with the coupled lower bound.
    Sample(SampleArgs),
    /// Monte Carlo validation of the sampler against the determinant transform.
    McValidate(McValidateArgs),
    /// Gamma tail probability and its two-sided bounds.
    GammaTail(GammaTailArgs),
    /// Diagonal bounds for the inverse of a kernel.
    Bounds(BoundsArgs),
    /// Unboundedness statistic on equally spaced configurations.
    UnboundedScan(UnboundedScanArgs),
    /// Green kernel of a random transient chain.
    GenKernel(GenKernelArgs),
    /// Potential densities of the Levy family.
    Levy(LevyArgs),
    /// Classify a log-power profile.
    Classify(ClassifyArgs),
    /// Check that a kernel inverts to a nonsingular M-matrix.
    ValidateKernel(ValidateKernelArgs),
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Args, Debug)]
struct OutArgs {
    /// Output file; stdout when absent.
    #[arg(long)]
    out: Option<std::path::PathBuf>,
}

#[derive(Args, Debug)]
struct PermanentArgs {
    #[arg(long)]
    matrix: std::path::PathBuf,
    #[arg(long, default_value_t = 1.0)]
    alpha: f64,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum Method {
    Det,
    Series,
}

#[derive(Args, Debug)]
struct LaplaceArgs {
    #[arg(long)]
    spec: std::path::PathBuf,
    /// Comma-separated nonnegative `s`.
    #[arg(long)]
    s: String,
    #[arg(long, value_enum, default_value_t = Method::Det)]
    method: Method,
    #[arg(long, default_value_t = 1e-10)]
    rel_tol: f64,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Args, Debug)]
struct ZDistArgs {
    #[arg(long)]
    spec: std::path::PathBuf,
    #[arg(long, default_value_t = 1.0 - 1e-9)]
    target: f64,
    /// Emit at most this many indices, in enumeration order.
    #[arg(long)]
    limit: Option<usize>,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Args, Debug)]
struct SampleArgs {
    #[arg(long)]
    spec: std::path::PathBuf,
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Also emit the coupled lower bound `L` and the index `Z`.
    #[arg(long)]
    couple: bool,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Args, Debug)]
struct McValidateArgs {
    #[arg(long)]
    spec: std::path::PathBuf,
    #[arg(long, default_value_t = 100_000)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Semicolon-separated `s` points, each comma-separated.
    #[arg(long)]
    s: Option<String>,
    /// Random `s` points drawn when `--s` is absent.
    #[arg(long, default_value_t = 10)]
    s_count: usize,
    /// Thresholds for the tail comparisons.
    #[arg(long, default_value = "0.5,1,2,4")]
    lambdas: String,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Args, Debug)]
struct GammaTailArgs {
    #[arg(long)]
    u: f64,
    #[arg(long, default_value_t = 1.0)]
    v: f64,
    #[arg(long)]
    t: f64,
    /// Include the two-sided bounds at `lambda = v t`.
    #[arg(long)]
    bounds: bool,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum Which {
    Simple,
    Sigma,
    Scaled,
    PsiStar,
    Sudakov,
}

#[derive(Args, Debug)]
struct BoundsArgs {
    #[arg(long)]
    kernel: std::path::PathBuf,
    #[arg(long, value_enum)]
    which: Which,
    /// Asymmetry constant for `sigma`; the minimal feasible one when absent.
    #[arg(long)]
    c: Option<f64>,
    /// Level `K_hat` for `scaled`; the largest diagonal entry when absent.
    #[arg(long)]
    k_hat: Option<f64>,
    /// Rearrangement index for `psi-star`.
    #[arg(long, default_value_t = 1)]
    p: usize,
    /// Points for `psi-star`; `1..n` when absent.
    #[arg(long)]
    points: Option<String>,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum KernelModel {
    /// `min(s, t)`.
    Brownian,
    /// `exp(-|s - t|)`.
    Exponential,
    /// Potential density of the Levy family.
    Levy,
}

#[derive(Args, Debug)]
struct UnboundedScanArgs {
    #[arg(long, value_enum)]
    kernel_model: KernelModel,
    /// Comma-separated point counts.
    #[arg(long)]
    n: String,
    /// Comma-separated interval lengths.
    #[arg(long, default_value = "1")]
    span: String,
    #[arg(long, default_value_t = 1)]
    p: usize,
    #[command(flatten)]
    levy: LevyModelArgs,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum KernelFormat {
    Json,
    Text,
}

#[derive(Args, Debug)]
struct GenKernelArgs {
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 0.1)]
    kill_min: f64,
    #[arg(long, value_enum, default_value_t = KernelFormat::Json)]
    format: KernelFormat,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Args, Debug, Clone)]
struct LevyModelArgs {
    #[arg(long, default_value_t = 1.0)]
    beta: f64,
    /// Weight of positive jumps.
    #[arg(long = "p-weight", alias = "lp", default_value_t = 0.5)]
    p_weight: f64,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    gamma: f64,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    delta: f64,
    /// Support cut of the profile; `e^2` when absent.
    #[arg(long)]
    eps_cut: Option<f64>,
    /// Tabulated profile `{"y": [..], "g": [..]}` instead of the log-power one.
    #[arg(long)]
    table: Option<std::path::PathBuf>,
}

#[derive(Args, Debug)]
#[group(required = true, multiple = false, id = "query")]
struct LevyQuery {
    /// `u(z)` and `u(-z)`.
    #[arg(long, allow_hyphen_values = true)]
    u: Option<f64>,
    /// `sigma^2(z)`.
    #[arg(long, allow_hyphen_values = true)]
    sigma2: Option<f64>,
    /// Characteristic exponent at `lambda`.
    #[arg(long, allow_hyphen_values = true)]
    psi: Option<f64>,
    /// Classification of the log-power profile.
    #[arg(long)]
    classify: bool,
    /// Integral criterion on comma-separated `n`.
    #[arg(long)]
    scan_integrals: Option<String>,
    /// Kernel matrix on the points of a JSON file.
    #[arg(long)]
    kernel: Option<std::path::PathBuf>,
    /// `|H| / sigma^2` on comma-separated `z`.
    #[arg(long)]
    h_ratio: Option<String>,
    /// Domination condition on comma-separated `z`.
    #[arg(long)]
    domination: Option<String>,
    /// Asymmetric asymptotics of `u(+-z)` on comma-separated `z`.
    #[arg(long)]
    asymmetry: Option<String>,
}

#[derive(Args, Debug)]
struct LevyArgs {
    #[command(flatten)]
    model: LevyModelArgs,
    #[command(flatten)]
    query: LevyQuery,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Args, Debug)]
struct ClassifyArgs {
    #[arg(long, allow_hyphen_values = true)]
    gamma: f64,
    #[arg(long, allow_hyphen_values = true)]
    delta: f64,
    #[arg(long = "p-weight", alias = "lp")]
    p_weight: f64,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Args, Debug)]
struct ValidateKernelArgs {
    kernel: std::path::PathBuf,
    #[command(flatten)]
    out: OutArgs,
}

fn run(cli: Cli) -> Result<(), CliError> {
    if let Some(w) = cli.workers {
        if w == 0 {
            return Err(CliError::Usage("--workers must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(w)
            .build_global()
            .map_err(|e| CliError::Internal(e.to_string()))?;
    }
    match cli.command {
        Command::Permanent(a) => commands::permanent(a),
        Command::Laplace(a) => commands::laplace(a),
        Command::ZDist(a) => commands::z_dist(a),
        Command::Sample(a) => commands::sample(a),
        Command::McValidate(a) => commands::mc_validate(a),
        Command::GammaTail(a) => commands::gamma_tail(a),
        Command::Bounds(a) => commands::bounds(a),
        Command::UnboundedScan(a) => commands::unbounded_scan(a),
        Command::GenKernel(a) => commands::gen_kernel(a),
        Command::Levy(a) => commands::levy(a),
        Command::Classify(a) => commands::classify(a),
        Command::ValidateKernel(a) => commands::validate_kernel(a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
