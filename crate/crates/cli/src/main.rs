mod commands;
mod config;
mod error;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use crate::config::{InputEntry, PipelineConfig};
use crate::error::CliError;
use crate::output::Outputs;

#[derive(Parser, Debug)]
#[command(
    name = "shapemetrics",
    version,
    about = "Shape metrics between neural network representations"
)]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct GlobalArgs {
    /// TOML pipeline configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (default: current directory).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads; 0 uses every core.
    #[arg(long, global = true)]
    workers: Option<usize>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, short, global = true)]
    verbose: bool,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Pairwise distance matrix between representation files.
    Distances {
        /// Representation files (NPY or CSV); replaces the configured inputs.
        inputs: Vec<PathBuf>,
    },
    /// Triangle-inequality audit of a distance matrix.
    Audit {
        distances: Option<PathBuf>,
        #[arg(long)]
        tol: Option<f64>,
        /// Number of triples to sample instead of the automatic choice.
        #[arg(long)]
        sample: Option<usize>,
    },
    /// SMACOF embeddings and their distortion.
    Embed {
        distances: Option<PathBuf>,
        /// Embedding dimensions, comma separated.
        #[arg(long, value_delimiter = ',')]
        dims: Vec<usize>,
        /// SMACOF seeds, comma separated.
        #[arg(long, value_delimiter = ',')]
        seeds: Vec<u64>,
    },
    /// Ward hierarchical clustering of a distance matrix.
    Cluster { distances: Option<PathBuf> },
    /// Regression from embedding coordinates to a per-network target.
    Regress {
        #[arg(long)]
        features: Option<PathBuf>,
        #[arg(long)]
        targets: Option<PathBuf>,
    },
    /// Distance estimates on stimulus subsamples of increasing size.
    Converge {
        #[arg(long)]
        x: Option<PathBuf>,
        #[arg(long)]
        y: Option<PathBuf>,
        /// Sample sizes, comma separated.
        #[arg(long, value_delimiter = ',')]
        m_grid: Vec<usize>,
        #[arg(long)]
        repeats: Option<usize>,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Distances { .. } => "distances",
            Command::Audit { .. } => "audit",
            Command::Embed { .. } => "embed",
            Command::Cluster { .. } => "cluster",
            Command::Regress { .. } => "regress",
            Command::Converge { .. } => "converge",
        }
    }
}

fn set<T>(slot: &mut Option<T>, value: Option<T>) {
    if value.is_some() {
        *slot = value;
    }
}

/// Config file values overridden by flags.
fn effective_config(cli: &Cli) -> Result<PipelineConfig, CliError> {
    let mut cfg = match &cli.global.config {
        Some(path) => PipelineConfig::load(path)?,
        None => PipelineConfig::default(),
    };
    let g = &cli.global;
    set(&mut cfg.out, g.out.clone());
    set(&mut cfg.workers, g.workers);
    set(&mut cfg.seed, g.seed);
    match &cli.command {
        Command::Distances { inputs } => {
            if !inputs.is_empty() {
                cfg.inputs = inputs
                    .iter()
                    .map(|path| InputEntry {
                        path: path.clone(),
                        label: None,
                    })
                    .collect();
            }
        }
        Command::Audit { distances, tol, sample } => {
            set(&mut cfg.audit.distances, distances.clone());
            set(&mut cfg.audit.tol, *tol);
            set(&mut cfg.audit.sample, *sample);
        }
        Command::Embed { distances, dims, seeds } => {
            set(&mut cfg.embed.distances, distances.clone());
            if !dims.is_empty() {
                cfg.embed.dims = dims.clone();
            }
            if !seeds.is_empty() {
                cfg.embed.seeds = seeds.clone();
            }
        }
        Command::Cluster { distances } => set(&mut cfg.cluster.distances, distances.clone()),
        Command::Regress { features, targets } => {
            set(&mut cfg.regress.features, features.clone());
            set(&mut cfg.regress.targets, targets.clone());
        }
        Command::Converge { x, y, m_grid, repeats } => {
            set(&mut cfg.converge.x, x.clone());
            set(&mut cfg.converge.y, y.clone());
            if !m_grid.is_empty() {
                cfg.converge.m_grid = m_grid.clone();
            }
            if let Some(r) = repeats {
                cfg.converge.repeats = *r;
            }
        }
    }
    Ok(cfg)
}

fn run(cli: &Cli) -> Result<String, CliError> {
    let started = Instant::now();
    let cfg = effective_config(cli)?;
    let mut out = Outputs::new(cfg.out_dir(), cfg.metric.allow_partial);
    let summary = match cli.command {
        Command::Distances { .. } => commands::distances(&cfg, &mut out),
        Command::Audit { .. } => commands::audit(&cfg, &mut out),
        Command::Embed { .. } => commands::embed(&cfg, &mut out),
        Command::Cluster { .. } => commands::cluster(&cfg, &mut out),
        Command::Regress { .. } => commands::regress(&cfg, &mut out),
        Command::Converge { .. } => commands::converge(&cfg, &mut out),
    }?;
    output::finish(out, cli.command.name(), &cfg, started)?;
    Ok(summary)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let error = json!({ "error": { "kind": "usage", "message": e.to_string().trim() } });
            eprintln!("{error}");
            return ExitCode::from(1);
        }
    };
    let level = if cli.global.verbose {
        log::LevelFilter::Debug
    } else {
        log::LevelFilter::Warn
    };
    env_logger::Builder::new().filter_level(level).init();
    match run(&cli) {
        Ok(summary) => {
            println!("{summary}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("{}", e.to_json());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
