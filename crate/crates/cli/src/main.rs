//! `maglab` command-line front end.

mod commands;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use maglab::constructor::ConstructKind;
use maglab::verifier::Classification;

#[derive(Parser, Debug)]
#[command(name = "maglab", version, about = "Magnetic flows near a closed geodesic: verify, build, integrate, audit")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Classify a system and report every named residual.
    Verify(VerifyArgs),
    /// Run a construction and write the resulting system document.
    Build(BuildArgs),
    /// Integrate the magnetic flow and emit the trajectory as CSV.
    Integrate(IntegrateArgs),
    /// Action sweep over the reparametrised core orbits.
    Sweep(SweepArgs),
    /// Critical value and the sampled lower-bound audit.
    Mane(ManeArgs),
    /// Orbit/Liouville measure mix and the fiber identities.
    Measure(MeasureArgs),
    /// List the built-in systems, or print one as a document.
    Catalog(CatalogArgs),
}

#[derive(Args, Debug, Clone)]
pub struct Common {
    /// `catalog:NAME` or a path to a system document.
    #[arg(value_name = "SYSTEM")]
    pub source: Option<String>,
    #[arg(long = "system", value_name = "SYSTEM", conflicts_with = "source")]
    pub system: Option<String>,
    /// Output directory; reports and tables are written there instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Residual tolerance.
    #[arg(long, default_value_t = maglab::verifier::DEFAULT_TOL)]
    pub tol: f64,
    #[arg(long, default_value_t = maglab::verifier::DEFAULT_MARGIN_TOL)]
    pub margin_tol: f64,
    /// Axis samples.
    #[arg(long, default_value_t = maglab::verifier::DEFAULT_AXIS_SAMPLES)]
    pub samples: usize,
    /// Chart grid as `T,X` (times by points per transverse axis).
    #[arg(long, value_parser = output::parse_grid)]
    pub grid: Option<maglab::sampling::GridSpec>,
    /// Replace the system by its strong-type rescaling first.
    #[arg(long)]
    pub rescale: bool,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Disable the data-parallel executor.
    #[arg(long)]
    pub sequential: bool,
}

#[derive(Args, Debug, Clone)]
pub struct Integration {
    /// RK4 step (or initial adaptive step); defaults to T/2000.
    #[arg(long)]
    pub h: Option<f64>,
    #[arg(long)]
    pub adaptive: bool,
    #[arg(long, default_value_t = 1e-9)]
    pub rtol: f64,
}

#[derive(Args, Debug)]
pub struct VerifyArgs {
    #[command(flatten)]
    pub common: Common,
    /// Exit 0 only when at least this class is reached.
    #[arg(long, value_enum, default_value_t = ClassArg::Strong)]
    pub require: ClassArg,
}

#[derive(Args, Debug)]
pub struct BuildArgs {
    #[command(flatten)]
    pub common: Common,
    /// Construction to run; overrides the document's `construct` key.
    #[arg(long, value_enum)]
    pub kind: Option<KindArg>,
    #[arg(long)]
    pub r0: Option<f64>,
    #[arg(long)]
    pub r1: Option<f64>,
    #[arg(long)]
    pub beta: Option<f64>,
    /// Exit 0 only when the output reaches this class.
    #[arg(long, value_enum, default_value_t = ClassArg::SemiStrong)]
    pub require: ClassArg,
}

#[derive(Args, Debug)]
pub struct IntegrateArgs {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub integration: Integration,
    /// Initial position `t,x2,...`; defaults to the axis point at t = 0.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub p: Option<Vec<f64>>,
    /// Initial velocity; defaults to the unit-speed core orbit.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub v: Option<Vec<f64>>,
    /// Integration time; defaults to one period.
    #[arg(long)]
    pub duration: Option<f64>,
}

#[derive(Args, Debug)]
pub struct SweepArgs {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub integration: Integration,
    /// Speed factors.
    #[arg(long = "r", value_delimiter = ',', default_value = "0.25,0.5,0.75,1,1.5,2")]
    pub r: Vec<f64>,
}

#[derive(Args, Debug)]
pub struct ManeArgs {
    #[command(flatten)]
    pub common: Common,
    /// Samples for the lower-bound audit.
    #[arg(long, default_value_t = 10_000)]
    pub audit_samples: usize,
}

#[derive(Args, Debug)]
pub struct MeasureArgs {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub integration: Integration,
    #[arg(long = "r", value_delimiter = ',', default_value = "0.5")]
    pub r: Vec<f64>,
    /// Samples for the energy-surface identity audit.
    #[arg(long, default_value_t = 1000)]
    pub audit_samples: usize,
}

#[derive(Args, Debug)]
pub struct CatalogArgs {
    /// Print this system as a document instead of listing.
    pub name: Option<String>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(ValueEnum, Debug, Clone, Copy)]
pub enum ClassArg {
    Fails,
    GeodesicType,
    SemiStrong,
    Strong,
}

impl From<ClassArg> for Classification {
    fn from(c: ClassArg) -> Self {
        match c {
            ClassArg::Fails => Classification::Fails,
            ClassArg::GeodesicType => Classification::GeodesicType,
            ClassArg::SemiStrong => Classification::SemiStrong,
            ClassArg::Strong => Classification::Strong,
        }
    }
}

#[derive(ValueEnum, Debug, Clone, Copy)]
pub enum KindArg {
    AlphaFromMetric,
    MetricFromAlpha,
    RescaleMetric,
    RescaleAlpha,
}

impl From<KindArg> for ConstructKind {
    fn from(k: KindArg) -> Self {
        match k {
            KindArg::AlphaFromMetric => ConstructKind::AlphaFromMetric,
            KindArg::MetricFromAlpha => ConstructKind::MetricFromAlpha,
            KindArg::RescaleMetric => ConstructKind::RescaleMetric,
            KindArg::RescaleAlpha => ConstructKind::RescaleAlpha,
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let name = commands::name(&cli.command);
    match commands::run(cli.command) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(err) => {
            eprintln!("{}", output::error_report(name, &err));
            ExitCode::from(2)
        }
    }
}
