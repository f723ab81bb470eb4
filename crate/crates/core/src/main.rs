use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Deserialize;

use ncflux::report::{emit_report, Format};
use ncflux::sparse::SolverKind;
use ncflux::study::{run_study, ElementKind, LoadSampleName, StudyConfig};
use ncflux::{Error, Result};

#[derive(Parser)]
#[command(name = "ncflux", version, about = "Convergence studies for nonconforming elements with flux recovery")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a convergence study and write its error table.
    Study(StudyArgs),
}

#[derive(Args, Debug, Default)]
struct StudyArgs {
    /// p1, p2, custom or linear
    #[arg(long)]
    problem: Option<String>,
    /// ncrt2d, ncrt3d or cr
    #[arg(long)]
    element: Option<String>,
    #[arg(long)]
    levels: Option<usize>,
    /// Gridline perturbation as a fraction of the smallest interval.
    #[arg(long)]
    perturb: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Leading rows excluded from the order fit.
    #[arg(long)]
    skip: Option<usize>,
    /// bicgstab, gmres or dense
    #[arg(long)]
    solver: Option<String>,
    #[arg(long)]
    tol: Option<f64>,
    /// Output file; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// csv or structured
    #[arg(long)]
    format: Option<String>,
    /// Residual load sampling for the corrected flux: centroid or mean.
    #[arg(long)]
    load: Option<String>,
    /// Flat TOML file with any of the keys above; flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Deserialize, Debug, Default)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    problem: Option<String>,
    element: Option<String>,
    levels: Option<usize>,
    perturb: Option<f64>,
    seed: Option<u64>,
    skip: Option<usize>,
    solver: Option<String>,
    tol: Option<f64>,
    out: Option<PathBuf>,
    format: Option<String>,
    load: Option<String>,
}

fn load_file(path: &PathBuf) -> Result<FileConfig> {
    let text = std::fs::read_to_string(path)?;
    toml::from_str(&text).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))
}

fn parse_load(s: &str) -> Result<LoadSampleName> {
    match s {
        "centroid" => Ok(LoadSampleName::Centroid),
        "mean" => Ok(LoadSampleName::Mean),
        other => Err(Error::Parse(format!("unknown load sampling '{other}'"))),
    }
}

fn study(args: StudyArgs) -> Result<()> {
    let file = match &args.config {
        Some(p) => load_file(p)?,
        None => FileConfig::default(),
    };
    let element: ElementKind = args
        .element
        .or(file.element)
        .as_deref()
        .unwrap_or("ncrt2d")
        .parse()?;
    let mut config = StudyConfig::for_element(element);
    if let Some(p) = args.problem.or(file.problem) {
        config.problem = p;
    }
    if let Some(v) = args.levels.or(file.levels) {
        config.levels = v;
    }
    if let Some(v) = args.perturb.or(file.perturb) {
        config.perturb = v;
    }
    if let Some(v) = args.seed.or(file.seed) {
        config.seed = v;
    }
    if let Some(v) = args.skip.or(file.skip) {
        config.skip = v;
    }
    if let Some(v) = args.solver.or(file.solver) {
        config.solver.kind = v.parse::<SolverKind>()?;
    }
    if let Some(v) = args.tol.or(file.tol) {
        config.solver.tol = v;
    }
    if let Some(v) = args.load.or(file.load) {
        config.load_sample = parse_load(&v)?;
    }
    let format: Format = args.format.or(file.format).as_deref().unwrap_or("csv").parse()?;
    let out = args.out.or(file.out);
    log::info!("{config:?}");
    let result = run_study(&config)?;
    emit_report(&result, format, out.as_deref())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Study(args) => study(args),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
