//! `riemann`: dispersion roots, residual verification and die rendering.
//!
//! Exit codes: 0 pass, 1 verification failure, 2 usage or input error,
//! 3 numerical failure.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser, Debug)]
#[command(name = "riemann", version, about = "Riemann-invariant solutions of quasilinear systems")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Roots ζ of the dispersion relation for λ = (1, ζ) and the kernel vectors of λ_i A^i.
    Dispersion(DispersionArgs),
    /// Residuals of a candidate solution on a grid.
    Verify {
        #[command(subcommand)]
        target: VerifyTarget,
    },
    /// Residual of the separated ODE for the general plasticity family.
    Ode417(Ode417Args),
    /// Trace conditions of the general plasticity family at random points.
    Tracecheck(TraceArgs),
    /// Extrusion-die streamlines as SVG, CSV or JSON.
    Die(DieArgs),
    /// Rotation-matrix factorization condition for an inhomogeneous system.
    InhomCheck(InhomArgs),
}

#[derive(Subcommand, Debug)]
pub enum VerifyTarget {
    /// Plasticity solution families.
    Plasticity(PlasticityArgs),
    /// Wave–particle solution from a holomorphic ψ(r).
    Waveparticle(WaveArgs),
    /// Any system against an explicit field.
    System(SystemArgs),
}

#[derive(Args, Debug, Clone)]
pub struct Common {
    /// Residual tolerance; RIEMANN_TOL overrides the built-in default.
    #[arg(long)]
    pub tol: Option<f64>,
    /// Where to write the report (stdout when absent).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Add x² to one field component (negative control).
    #[arg(long)]
    pub corrupt: bool,
}

#[derive(Args, Debug)]
pub struct DispersionArgs {
    #[arg(long, default_value = "builtin:plasticity-subsystem")]
    pub system: String,
    /// State u as comma-separated complex expressions (zeros when absent).
    #[arg(long)]
    pub state: Option<String>,
    /// Builtin coupling constant for wave-particle.
    #[arg(long, default_value_t = 1.0)]
    pub a: f64,
    #[arg(long, value_enum, default_value_t = Format::Text)]
    pub format: Format,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct PlasticityArgs {
    /// general, case-i or case-ii; overrides the family in --params.
    #[arg(long)]
    pub family: Option<String>,
    /// PlasticityParams as JSON text or a path to a JSON file.
    #[arg(long)]
    pub params: Option<String>,
    /// Seed for random damped parameters (general family without --params).
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long, default_value = "default")]
    pub grid: String,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Args, Debug)]
pub struct WaveArgs {
    #[arg(long)]
    pub psi: String,
    #[arg(long, default_value_t = 1.0)]
    pub a: f64,
    #[arg(long, default_value_t = 1)]
    pub n: i64,
    /// `default` here means x ∈ [0.5, 2], y ∈ [−1, 1], 17×17.
    #[arg(long, default_value = "default")]
    pub grid: String,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Args, Debug)]
pub struct SystemArgs {
    #[arg(long)]
    pub system: String,
    /// JSON object mapping each unknown to an expression in the coordinates,
    /// or a path to one. Builtin systems fall back to their known solutions.
    #[arg(long)]
    pub fields: Option<String>,
    #[arg(long)]
    pub params: Option<String>,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long)]
    pub psi: Option<String>,
    #[arg(long, default_value_t = 1.0)]
    pub a: f64,
    #[arg(long, default_value_t = 1)]
    pub n: i64,
    #[arg(long, default_value = "default")]
    pub grid: String,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Args, Debug)]
pub struct Ode417Args {
    #[arg(long)]
    pub params: Option<String>,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long, default_value_t = 0.5)]
    pub t: f64,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Args, Debug)]
pub struct TraceArgs {
    #[arg(long)]
    pub params: Option<String>,
    /// Seed for the parameters and for the sample points.
    #[arg(long, default_value_t = 3)]
    pub seed: u64,
    #[arg(long, default_value_t = 20)]
    pub points: usize,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Args, Debug)]
pub struct DieArgs {
    /// fig1 or fig2.
    #[arg(long, conflicts_with = "params")]
    pub figure: Option<String>,
    /// Die configuration as JSON text or a path.
    #[arg(long)]
    pub params: Option<String>,
    #[arg(long, value_enum, default_value_t = Format::Svg)]
    pub format: Format,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Fail when any curve's tangency residual exceeds this.
    #[arg(long)]
    pub tol: Option<f64>,
}

#[derive(Args, Debug)]
pub struct InhomArgs {
    #[arg(long, default_value = "builtin:wave-particle")]
    pub system: String,
    #[arg(long, default_value_t = 1.0)]
    pub a: f64,
    /// State u as comma-separated complex expressions.
    #[arg(long, default_value = "0, pi")]
    pub state: String,
    /// Spatial point x (zeros when absent).
    #[arg(long)]
    pub point: Option<String>,
    /// Wave vector λ as comma-separated complex expressions.
    #[arg(long, default_value = "1, i")]
    pub lambda: String,
    /// Scalar Ω; with --rotation, checks that candidate instead of the reference one.
    #[arg(long)]
    pub omega: Option<String>,
    /// Rotation L as a JSON array of rows of complex expressions.
    #[arg(long)]
    pub rotation: Option<String>,
    #[arg(long, value_enum, default_value_t = ModeArg::SimpleMode)]
    pub mode: ModeArg,
    #[command(flatten)]
    pub common: Common,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum Format {
    Text,
    Json,
    Svg,
    Csv,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum ModeArg {
    SimpleWave,
    SimpleMode,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::run(cli.command) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(err) => {
            eprintln!("riemann: {err}");
            ExitCode::from(if err.is_numerical() { 3 } else { 2 })
        }
    }
}
