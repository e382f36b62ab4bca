//! `roadcell`: synthesize or ingest road data, generate cell load, and run
//! the feature-set comparison.

mod commands;
mod config;
mod error;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::config::ProfileKind;
use crate::error::{CliError, EXIT_USAGE};

#[derive(Debug, Parser)]
#[command(name = "roadcell", version, about = "Road-driven cellular load generation and forecasting benchmark")]
struct Cli {
    /// Worker threads for independent runs (default: one per processor).
    #[arg(long, global = true)]
    jobs: Option<usize>,

    /// More log output (repeat for debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write synthetic detector CSVs.
    SynthRoad(SynthArgs),
    /// Check detector CSVs, fill short gaps and align calendars.
    IngestValidate(IngestArgs),
    /// Generate per-BS call series and a call log.
    Generate(GenerateArgs),
    /// Train and evaluate every feature set and seed; write reports.
    Run(RunArgs),
    /// Merge and print reports from earlier runs.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long, default_value_t = 4)]
    pub weeks: usize,
    /// Number of detectors when no corridor file is given.
    #[arg(long, default_value_t = 3)]
    pub sites: usize,
    /// Take detector ids from this corridor file instead.
    #[arg(long)]
    pub corridor: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, default_value_t = ProfileKind::Diurnal)]
    pub profile: ProfileKind,
    /// Mean flow per slot for the flat profile.
    #[arg(long, default_value_t = 100.0)]
    pub flow: f64,
    /// Mean speed (mph) for the flat profile.
    #[arg(long, default_value_t = 60.0)]
    pub speed: f64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SourceArgs {
    /// Experiment file supplying the corridor and road source.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Corridor file with `[[site]]` tables.
    #[arg(long)]
    pub corridor: Option<PathBuf>,
    /// Directory holding `<detector_id>.csv` files.
    #[arg(long)]
    pub road_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    #[command(flatten)]
    pub source: SourceArgs,
    /// Longest run of missing slots that is interpolated; longer runs drop the day.
    #[arg(long, default_value_t = 6)]
    pub max_gap: usize,
    /// Write validated CSVs and validation.json here.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[command(flatten)]
    pub source: SourceArgs,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: PathBuf,
    /// Skip the per-call JSON lines log.
    #[arg(long)]
    pub no_call_log: bool,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Comma-separated seeds, e.g. 1,2,3.
    #[arg(long, value_delimiter = ',')]
    pub seeds: Option<Vec<u64>>,
    /// Comma-separated feature sets among C, FSC, NHC, FSNHC.
    #[arg(long, value_delimiter = ',')]
    pub feature_sets: Option<Vec<String>>,
    /// Flow noise as a fraction of flow; adds the noisy-flow section (0 disables).
    #[arg(long)]
    pub noise: Option<f64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Run output directories containing report.json.
    #[arg(required = true)]
    pub dirs: Vec<PathBuf>,
    /// Also write the merged report files here.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn execute(cli: &Cli) -> Result<(), CliError> {
    if let Some(jobs) = cli.jobs {
        if jobs == 0 {
            return Err(CliError::Usage("--jobs must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .map_err(|e| CliError::Usage(e.to_string()))?;
    }
    if let Command::Run(args) = &cli.command {
        if args.noise.is_some_and(|n| !(n >= 0.0 && n.is_finite())) {
            return Err(CliError::Usage("--noise must be a non-negative number".into()));
        }
    }
    match &cli.command {
        Command::SynthRoad(a) => commands::synth_road(a),
        Command::IngestValidate(a) => commands::ingest_validate(a),
        Command::Generate(a) => commands::generate_cells(a),
        Command::Run(a) => commands::run(a),
        Command::Report(a) => commands::report(a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code as u8);
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();

    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
