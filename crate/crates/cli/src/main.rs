use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use seisfrag::accelerogram::AccelUnit;
use seisfrag_cli::commands::{self, Context};
use seisfrag_cli::config::RunConfig;
use seisfrag_cli::error::{CliError, CliResult};

/// Synthetic ground motions, structural demands and seismic fragility curves.
#[derive(Debug, Parser)]
#[command(name = "seisfrag", version)]
struct Cli {
    /// TOML run configuration; defaults apply to missing keys.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed, overriding the configuration.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory, overriding the configuration.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads (default: all cores). Results do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Also write SVG charts.
    #[arg(long, global = true)]
    plot: bool,
    /// Acceleration unit of two-column motion files: g or m/s2.
    #[arg(long, global = true)]
    units: Option<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Synthesize motions and their descriptor summary.
    Generate,
    /// Run the structural analysis on motion files.
    Simulate {
        /// Directory of motion files (default: <out>/motions).
        #[arg(long)]
        motions: Option<PathBuf>,
        /// Individual motion files, analysed instead of a directory.
        files: Vec<PathBuf>,
    },
    /// Fit fragility curves to a demand-records CSV.
    Fit {
        /// Demand records (default: <out>/demand_records.csv).
        #[arg(long)]
        records: Option<PathBuf>,
    },
    /// Bootstrap confidence bands from a demand-records CSV.
    Bootstrap {
        #[arg(long)]
        records: Option<PathBuf>,
    },
    /// Every stage in sequence.
    Pipeline,
}

fn run(cli: Cli) -> CliResult<()> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    let out = cli
        .out
        .clone()
        .or_else(|| cfg.out.clone())
        .unwrap_or_else(|| PathBuf::from("seisfrag_out"));
    cfg.out = Some(out.clone());
    cfg.validate()?;
    let units = cli
        .units
        .as_deref()
        .map(|u| {
            u.parse::<AccelUnit>()
                .map_err(|e| CliError::Config(e.to_string()))
        })
        .transpose()?;
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Config(e.to_string()))?;
    }
    let name = match &cli.command {
        Command::Generate => "generate",
        Command::Simulate { .. } => "simulate",
        Command::Fit { .. } => "fit",
        Command::Bootstrap { .. } => "bootstrap",
        Command::Pipeline => "pipeline",
    };
    let mut ctx = Context::new(cfg, out.clone(), cli.plot, units, name)?;
    let result = match cli.command {
        Command::Generate => commands::generate(&mut ctx),
        Command::Simulate { motions, files } => {
            let files = if files.is_empty() {
                commands::motion_files(&motions.unwrap_or_else(|| out.join("motions")))?
            } else {
                files
            };
            commands::simulate(&mut ctx, &files).map(|_| ())
        }
        Command::Fit { records } => {
            let recs =
                commands::read_records(&records.unwrap_or_else(|| out.join("demand_records.csv")))?;
            commands::fit(&mut ctx, &recs).map(|_| ())
        }
        Command::Bootstrap { records } => {
            let recs =
                commands::read_records(&records.unwrap_or_else(|| out.join("demand_records.csv")))?;
            commands::bootstrap(&mut ctx, &recs)
        }
        Command::Pipeline => commands::pipeline(&mut ctx),
    };
    if let Err(e) = &result {
        ctx.manifest.warn(format!("aborted: {e}"));
    }
    ctx.finish()?;
    result
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("seisfrag: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
