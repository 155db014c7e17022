//! The `lapemb` command: spectra, embeddings, certificates, registration,
//! and the analytic verification reports, as files plus a manifest.
//!
//! Exit codes: 0 on success, 1 when the computation ran but the domain check
//! failed (or an input could not be processed), 2 on usage errors.

mod commands;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(
    name = "lapemb",
    version,
    about = "Laplacian eigenfunction embeddings of meshes and point clouds"
)]
pub struct Cli {
    #[command(subcommand)]
    pub cmd: Command,
}

#[derive(Subcommand)]
pub enum Command {
    /// Assemble a Laplacian and dump it as coordinate triplets plus a mass vector.
    Laplacian(LaplacianArgs),
    /// Solve for the smallest eigenpairs and write the spectrum file.
    Eigen(EigenArgs),
    /// Map vertices into eigenfunction coordinates (CSV, plus OFF at m = 3).
    Embed(EmbedArgs),
    /// Find the smallest m whose eigenfunction map embeds the shape.
    EmbedDim(EmbedDimArgs),
    /// Heat-kernel separation certificate for a truncation order.
    Certify(CertifyArgs),
    /// Match two shapes through their spectra, resolving sign and basis ambiguity.
    Register(RegisterArgs),
    /// Check the flat-torus embedding dimension formula against a grid scan.
    TorusVerify(TorusVerifyArgs),
    /// Tabulate the sphere spectrum and check the coordinate eigenmap.
    SphereVerify(SphereVerifyArgs),
}

/// Options for building graph Laplacians from point clouds; ignored for
/// mesh inputs, which always use the cotangent construction.
#[derive(Args)]
pub struct GraphOpts {
    /// Neighbors per point in the cloud graph.
    #[arg(long, default_value_t = lapemb::geometry::DEFAULT_CLOUD_K)]
    pub knn: usize,
    /// Fixed Gaussian kernel bandwidth; defaults to the cloud's median
    /// nearest-neighbor distance.
    #[arg(long)]
    pub bandwidth: Option<f64>,
}

#[derive(Args)]
pub struct CommonOpts {
    /// Directory for output files and the manifest.
    #[arg(long, default_value = ".")]
    pub out_dir: PathBuf,
    /// Seed for every randomized component (sampled scans, solver starts).
    #[arg(long, default_value_t = lapemb::DEFAULT_SEED)]
    pub seed: u64,
}

#[derive(Args)]
pub struct LaplacianArgs {
    /// Mesh (.off, .ply) or point cloud (.csv).
    pub input: PathBuf,
    #[command(flatten)]
    pub graph: GraphOpts,
    #[command(flatten)]
    pub common: CommonOpts,
}

#[derive(Args)]
pub struct EigenArgs {
    pub input: PathBuf,
    /// Non-constant eigenpairs to compute.
    #[arg(long)]
    pub count: usize,
    /// Residual tolerance, relative to max(1, lambda).
    #[arg(long, default_value_t = 1e-10)]
    pub tol: f64,
    /// Hard cap on the solver's subspace; 0 picks one from the request size.
    #[arg(long, default_value_t = 0)]
    pub max_subspace: usize,
    #[command(flatten)]
    pub graph: GraphOpts,
    #[command(flatten)]
    pub common: CommonOpts,
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
pub enum MapChoice {
    Eigen,
    Diffusion,
    Gps,
}

#[derive(Args)]
pub struct EmbedArgs {
    pub input: PathBuf,
    #[arg(long, value_enum, default_value_t = MapChoice::Eigen)]
    pub map: MapChoice,
    /// Number of eigenfunction coordinates.
    #[arg(long)]
    pub m: usize,
    /// Diffusion time; defaults to 1/lambda_1. Ignored by the other maps.
    #[arg(long)]
    pub t: Option<f64>,
    #[command(flatten)]
    pub graph: GraphOpts,
    #[command(flatten)]
    pub common: CommonOpts,
}

#[derive(Args)]
pub struct EmbedDimArgs {
    pub input: PathBuf,
    /// Largest m to try.
    #[arg(long)]
    pub mmax: usize,
    /// Pairs at graph distance below this need not separate; defaults to 3x
    /// the mean point spacing.
    #[arg(long)]
    pub delta: Option<f64>,
    /// Far pairs must exceed this image distance; defaults to a floor derived
    /// from the image's own near-pair resolution.
    #[arg(long)]
    pub tau: Option<f64>,
    /// Smallest acceptable local differential rank ratio.
    #[arg(long, default_value_t = 1e-3)]
    pub rank_tol: f64,
    /// Intrinsic dimension of the shape.
    #[arg(long, default_value_t = 2)]
    pub intrinsic_dim: usize,
    #[command(flatten)]
    pub graph: GraphOpts,
    #[command(flatten)]
    pub common: CommonOpts,
}

#[derive(Args)]
pub struct CertifyArgs {
    pub input: PathBuf,
    /// Pairs at geodesic distance >= epsilon must separate.
    #[arg(long)]
    pub epsilon: f64,
    /// Largest truncation order to try.
    #[arg(long)]
    pub dmax: usize,
    #[command(flatten)]
    pub graph: GraphOpts,
    #[command(flatten)]
    pub common: CommonOpts,
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
pub enum ModeChoice {
    Exhaustive,
    Greedy,
}

#[derive(Args)]
pub struct RegisterArgs {
    /// Source shape; each of its vertices is matched to a target vertex.
    pub source: PathBuf,
    /// Target shape.
    pub target: PathBuf,
    /// Eigenfunction coordinates to match in.
    #[arg(long)]
    pub m: usize,
    #[arg(long, value_enum, default_value_t = ModeChoice::Exhaustive)]
    pub mode: ModeChoice,
    /// Relative gap below which eigenvalues count as one degenerate group.
    #[arg(long, default_value_t = lapemb::DEGENERACY_TOL)]
    pub degeneracy_tol: f64,
    #[command(flatten)]
    pub graph: GraphOpts,
    #[command(flatten)]
    pub common: CommonOpts,
}

#[derive(Args)]
pub struct TorusVerifyArgs {
    /// Short side length (the n-1 square axes).
    #[arg(long)]
    pub a: f64,
    /// Long side length.
    #[arg(long)]
    pub b: f64,
    /// Torus dimension.
    #[arg(long, default_value_t = 2)]
    pub n: usize,
    /// Grid points per axis, comma-separated, long axis last; defaults to
    /// roughly 10k points shaped like the torus.
    #[arg(long, value_delimiter = ',')]
    pub dims: Option<Vec<usize>>,
    #[command(flatten)]
    pub common: CommonOpts,
}

#[derive(Args)]
pub struct SphereVerifyArgs {
    /// Sphere dimension n (the sphere lives in R^{n+1}).
    #[arg(long)]
    pub n: usize,
    /// Tabulate eigenvalues through this spherical-harmonic degree.
    #[arg(long, default_value_t = 8)]
    pub degree_max: u32,
    /// Random unit vectors to push through the coordinate eigenmap.
    #[arg(long, default_value_t = 500)]
    pub samples: usize,
    #[command(flatten)]
    pub common: CommonOpts,
}

/// `LAPEMB_THREADS` caps the worker pool; unset or 0 keeps the default of
/// one thread per core.
fn configure_threads() -> Result<(), String> {
    let Some(raw) = std::env::var_os("LAPEMB_THREADS") else {
        return Ok(());
    };
    let raw = raw.to_string_lossy();
    let threads: usize = raw
        .parse()
        .map_err(|_| format!("LAPEMB_THREADS must be a non-negative integer, got {raw:?}"))?;
    if threads == 0 {
        return Ok(());
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| format!("LAPEMB_THREADS: {e}"))
}

fn main() -> ExitCode {
    if let Err(msg) = configure_threads() {
        eprintln!("{msg}");
        return ExitCode::from(2);
    }
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // --help and --version arrive here too; only real parse
            // failures are usage errors.
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match commands::run(cli.cmd) {
        Ok(commands::Outcome::Pass) => ExitCode::SUCCESS,
        Ok(commands::Outcome::Fail(msg)) => {
            eprintln!("{msg}");
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
