use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use moscito::pipeline::{self, PipelineConfig, Report};
use moscito::Error;

/// Temporal subspace clustering of molecular-dynamics trajectories.
///
/// Settings come from built-in defaults, then the `--config` file, then
/// `--seed`/`--out` on the command line.
#[derive(Debug, Parser)]
#[command(name = "moscito", version)]
struct Cli {
    /// TOML config file.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Overrides `seed`.
    #[arg(long, global = true, value_name = "N")]
    seed: Option<u64>,
    /// Overrides `output_dir`.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Print failures as a JSON record on stderr.
    #[arg(long, global = true)]
    json_errors: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Compute the feature matrix.
    Featurize,
    /// Cluster with every configured method and k.
    Cluster,
    /// VAMP-r table for existing discrete trajectories.
    Score,
    /// Re-run MOSCITO once per value of one config leaf.
    Sweep {
        /// Dotted config path or alias (s, d, lambda1, lambda2, alpha, beta, weight_mode, ...).
        #[arg(long)]
        axis: String,
        /// Comma-separated values.
        #[arg(long, value_delimiter = ',', required = true, num_args = 1..)]
        values: Vec<String>,
    },
    /// Write synthetic features and planted labels.
    Synth,
    /// Wall time per stage for a fixed number of solver iterations.
    Runtime,
    /// Print the resolved config.
    Config,
}

fn resolve(cli: &Cli) -> Result<PipelineConfig, Error> {
    let mut cfg = match &cli.config {
        Some(path) => PipelineConfig::load(path).map_err(|e| match e {
            Error::Io { .. } => Error::Config(e.to_string()),
            other => other,
        })?,
        None => PipelineConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    cfg.solver.seed = cfg.seed;
    if let Some(out) = &cli.out {
        cfg.output_dir = out.clone();
    }
    Ok(cfg)
}

fn print_report(report: &Report) {
    for w in &report.warnings {
        eprintln!("warning: {w}");
    }
    for m in &report.missing {
        eprintln!("missing: {}", m.display());
    }
    for p in &report.written {
        println!("{}", p.display());
    }
}

fn run(cli: &Cli) -> Result<(), Error> {
    let cfg = resolve(cli)?;
    let report = match &cli.command {
        Command::Featurize => pipeline::cmd_featurize(&cfg)?,
        Command::Cluster => pipeline::cmd_cluster(&cfg)?,
        Command::Score => pipeline::cmd_score(&cfg)?,
        Command::Sweep { axis, values } => pipeline::cmd_sweep(&cfg, axis, values)?,
        Command::Synth => pipeline::cmd_synth(&cfg)?,
        Command::Runtime => {
            // stdout carries only the JSON record here.
            let (report, rt) = pipeline::cmd_runtime(&cfg)?;
            println!("{}", serde_json::to_string_pretty(&rt).expect("runtime serializes"));
            for p in &report.written {
                eprintln!("wrote {}", p.display());
            }
            return Ok(());
        }
        Command::Config => {
            print!("{}", cfg.to_toml());
            return Ok(());
        }
    };
    print_report(&report);
    Ok(())
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) => 2,
        _ => 1,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let code = exit_code(&e);
            if cli.json_errors {
                let record = serde_json::json!({
                    "error": e.kind(),
                    "message": e.to_string(),
                    "exit_code": code,
                });
                eprintln!("{record}");
            } else {
                eprintln!("error: {e}");
            }
            ExitCode::from(code)
        }
    }
}
