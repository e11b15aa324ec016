//! Command-line orchestration: configuration, pipelines, versioned artifacts and plots.

pub mod artifacts;
pub mod config;
pub mod error;
pub mod pipelines;
pub mod plot;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::artifacts::{read_json, Writer};
use crate::config::{EpsSchedule, ModelKind, Pipeline, RunConfig};
use crate::error::{CliError, CliResult};
use dense_orbits::polyconvex::DecompositionResult;

#[derive(Debug, Parser)]
#[command(name = "dense-orbits", version, about = "Staged constructions, cube decompositions and tower checks")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Common {
    /// Working precision of the fits: double or double-double.
    #[arg(long)]
    pub precision: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Draw points of the solenoid from the discretised Haar measure.
    SolenoidSample {
        #[arg(long, value_delimiter = ',')]
        radix: Option<Vec<u64>>,
        #[arg(long)]
        dim: Option<usize>,
        #[arg(long)]
        depth: Option<usize>,
        #[arg(long)]
        count: Option<usize>,
        #[arg(long)]
        resolution: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Run the staged construction, or continue one with --resume.
    Build {
        #[arg(long, value_delimiter = ',', conflicts_with = "resume")]
        radix: Option<Vec<u64>>,
        #[arg(long)]
        stages: Option<usize>,
        /// `default` or a comma-separated list of fractions, one per stage.
        #[arg(long)]
        eps_schedule: Option<String>,
        #[arg(long, value_delimiter = ',')]
        degree_caps: Option<Vec<usize>>,
        #[arg(long)]
        grid: Option<usize>,
        #[arg(long, required_unless_present = "resume")]
        out: Option<PathBuf>,
        #[arg(long)]
        resume: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Recompute density and telescoping certificates for a build directory.
    DensityReport {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        grid: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Decompose a JSON list of unit cubes.
    DecomposeCubes {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        eps: Option<String>,
        #[arg(long)]
        dim: Option<usize>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Certify a union of products of planar squares.
    CertifyProducts {
        #[arg(long)]
        input: Option<PathBuf>,
        #[arg(long)]
        count: Option<usize>,
        #[arg(long)]
        grid: Option<usize>,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Validate tower data against an action model.
    TowersValidate {
        #[arg(long, value_enum)]
        model: Option<ModelKind>,
        #[arg(long, value_delimiter = ',')]
        a: Option<Vec<u64>>,
        #[arg(long)]
        dim: Option<usize>,
        #[arg(long)]
        samples: Option<usize>,
        #[arg(long)]
        resolution: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run the general-stage construction on a tower.
    TowersBuild {
        #[arg(long, value_enum)]
        model: Option<ModelKind>,
        #[arg(long, value_delimiter = ',')]
        a: Option<Vec<u64>>,
        #[arg(long)]
        dim: Option<usize>,
        #[arg(long)]
        stages: Option<usize>,
        #[arg(long)]
        degree_cap: Option<usize>,
        #[arg(long)]
        grid: Option<usize>,
        #[arg(long)]
        samples: Option<usize>,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Render a decomposition result as SVG.
    Plot {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Two one-based coordinate axes, e.g. `1,2`.
        #[arg(long, value_delimiter = ',')]
        axes: Option<Vec<usize>>,
    },
    /// Run the pipeline described by a TOML configuration file.
    Run {
        #[arg(long)]
        config: PathBuf,
    },
}

fn precision(common: &Common, c: &mut RunConfig) -> CliResult<()> {
    c.seed = common.seed;
    if let Some(p) = &common.precision {
        c.precision = Some(dense_orbits::numeric::Precision::parse(p).map_err(|e| CliError::Config(e.to_string()))?);
    }
    Ok(())
}

/// Translates subcommand flags into the configuration they stand for.
pub fn to_config(command: Command) -> CliResult<Option<RunConfig>> {
    let c = match command {
        Command::SolenoidSample { radix, dim, depth, count, resolution, out, common } => {
            let mut c = RunConfig::new(Pipeline::SolenoidSample);
            (c.radix, c.dim, c.depth, c.count, c.resolution, c.out) = (radix, dim, depth, count, resolution, out);
            precision(&common, &mut c)?;
            c
        }
        Command::Build { radix, stages, eps_schedule, degree_caps, grid, out, resume: None, common } => {
            let mut c = RunConfig::new(Pipeline::Build);
            (c.radix, c.stages, c.degree_caps, c.grid, c.out) = (radix, stages, degree_caps, grid, out);
            c.eps_schedule = eps_schedule.as_deref().map(EpsSchedule::from_flag);
            precision(&common, &mut c)?;
            c
        }
        Command::Build { resume: Some(_), .. } | Command::Plot { .. } | Command::Run { .. } => return Ok(None),
        Command::DensityReport { input, grid, out } => {
            let mut c = RunConfig::new(Pipeline::DensityReport);
            (c.input, c.grid, c.out) = (Some(input), grid, out);
            c
        }
        Command::DecomposeCubes { input, eps, dim, out } => {
            let mut c = RunConfig::new(Pipeline::DecomposeCubes);
            (c.input, c.eps, c.dim, c.out) = (Some(input), eps, dim, Some(out));
            c
        }
        Command::CertifyProducts { input, count, grid, out, common } => {
            let mut c = RunConfig::new(Pipeline::CertifyProducts);
            (c.input, c.count, c.grid, c.out) = (input, count, grid, Some(out));
            precision(&common, &mut c)?;
            c
        }
        Command::TowersValidate { model, a, dim, samples, resolution, out, seed } => {
            let mut c = RunConfig::new(Pipeline::TowersValidate);
            (c.model, c.a, c.dim, c.samples, c.resolution, c.out, c.seed) = (model, a, dim, samples, resolution, out, seed);
            c
        }
        Command::TowersBuild { model, a, dim, stages, degree_cap, grid, samples, out, common } => {
            let mut c = RunConfig::new(Pipeline::TowersBuild);
            (c.model, c.a, c.dim, c.stages, c.grid, c.samples, c.out) = (model, a, dim, stages, grid, samples, Some(out));
            c.degree_caps = degree_cap.map(|d| vec![d]);
            precision(&common, &mut c)?;
            c
        }
    };
    Ok(Some(c))
}

fn plot(input: PathBuf, out: PathBuf, axes: Option<Vec<usize>>) -> CliResult<()> {
    let axes = match axes.as_deref() {
        None => None,
        Some([i, j]) if *i >= 1 && *j >= 1 => Some((i - 1, j - 1)),
        Some(_) => return Err(CliError::Config("--axes takes two one-based axis numbers".into())),
    };
    let (_, result): (_, DecompositionResult) = read_json(&input)?;
    let (svg, _) = plot::render(&result, axes)?;
    let mut c = RunConfig::new(Pipeline::DecomposeCubes);
    c.input = Some(input);
    Writer::new(&c).text(&out, &svg)
}

/// Runs one parsed command and returns the process exit status.
pub fn execute(cli: Cli) -> i32 {
    let result = match cli.command {
        Command::Plot { input, out, axes } => plot(input, out, axes),
        Command::Build { resume: Some(dir), .. } => pipelines::resume_build(&dir).map(report),
        Command::Run { config } => RunConfig::load(&config).and_then(pipelines::run_pipeline).map(report),
        other => to_config(other).and_then(|c| pipelines::run_pipeline(c.expect("pipeline command"))).map(report),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn report(s: pipelines::RunSummary) {
    eprintln!("{:?} passed; config {}", s.pipeline, s.config_hash);
}

/// Parses `args` (including the program name) and runs the command.
pub fn main_with<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    match Cli::try_parse_from(args) {
        Ok(cli) => execute(cli),
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            code
        }
    }
}
