use std::path::PathBuf;

use anyhow::Context;
use clap::{Parser, Subcommand};
use pufem::config::{parse_offset, ConfigFile, Experiment, LevelRange};
use pufem::experiments;

/// One comma-separated value, not a repeated flag.
type Offset = Vec<f64>;

#[derive(Parser)]
#[command(name = "pufem", version, about = "Particle regularization experiments on smooth PUFEM spaces")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment and write its CSV.
    Run(RunArgs),
    /// Dump the tabulated one-dimensional partition function.
    PhiTable {
        #[arg(long, default_value_t = pufem_core::mollifier::DEFAULT_TABLE_RESOLUTION)]
        resolution: usize,
        #[arg(long, default_value = "phi.csv")]
        out: PathBuf,
    },
}

#[derive(clap::Args)]
struct RunArgs {
    /// JSON configuration; flags below override its entries.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    experiment: Option<Experiment>,
    /// Inclusive level range `a..b`.
    #[arg(long)]
    levels: Option<LevelRange>,
    #[arg(long = "C")]
    c: Option<f64>,
    #[arg(long)]
    s: Option<u32>,
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    dim: Option<usize>,
    /// Grid origin shift `dx,dy(,dz)`.
    #[arg(long, value_parser = parse_offset, allow_hyphen_values = true)]
    offset: Option<Offset>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    threads: Option<usize>,
}

fn main() -> anyhow::Result<()> {
    match Cli::parse().command {
        Command::Run(args) => {
            let file = match &args.config {
                Some(path) => ConfigFile::load(path)?,
                None => ConfigFile::default(),
            };
            let mut cfg = file.resolve(args.experiment)?;
            if let Some(v) = args.levels {
                cfg.levels = v;
            }
            if let Some(v) = args.c {
                cfg.c = v;
            }
            if let Some(v) = args.s {
                cfg.s = v;
            }
            if let Some(v) = args.epsilon {
                cfg.epsilon = v;
            }
            if let Some(v) = args.dim {
                cfg.dim = v;
            }
            if let Some(v) = args.offset {
                cfg.offset = v;
            }
            if let Some(v) = args.out {
                cfg.output = v;
            }
            if args.threads.is_some() {
                cfg.threads = args.threads;
            }
            let (outcome, path) = experiments::run(&cfg).context("experiment failed")?;
            println!("wrote {} ({} rows)", path.display(), outcome.table.rows.len());
        }
        Command::PhiTable { resolution, out } => {
            experiments::write_phi_table(resolution, &out)?;
            println!("wrote {}", out.display());
        }
    }
    Ok(())
}
