use std::path::PathBuf;

use anyhow::{bail, Result};
use clap::{Parser, Subcommand};
use fwboost_bench::config::ExperimentConfig;
use fwboost_bench::report::{write_outputs, Format};
use fwboost_bench::{fetch, runner, tune};

#[derive(Parser)]
#[command(name = "fwboost", version, about = "Run projection-free OCO and bandit boosting experiments")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run an experiment and write its reports.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Comma-separated seeds, overriding the config.
        #[arg(long, value_delimiter = ',')]
        seeds: Option<Vec<u64>>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Report formats; may be repeated or comma-separated.
        #[arg(long, value_enum, value_delimiter = ',', default_values = ["csv"])]
        format: Vec<Format>,
    },
    /// Download a dataset listed in the schema directory.
    FetchData {
        dataset: String,
        #[arg(long, default_value = "data/schemas")]
        schemas: PathBuf,
        #[arg(long, default_value = "data")]
        dir: PathBuf,
    },
    /// Grid-search learner hyperparameters on the first half of the stream.
    Tune {
        #[arg(long)]
        config: PathBuf,
        /// Write the full scored grid here as CSV.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match Cli::parse().command {
        Cmd::Run { config, seeds, out, format } => {
            let mut cfg = ExperimentConfig::load(&config)?;
            if let Some(seeds) = seeds {
                cfg.seeds = seeds;
            }
            let output = runner::run_experiment(&cfg)?;
            for r in &output.reports {
                for (seed, e) in r.errors() {
                    eprintln!("{} seed {seed}: {e}", r.algorithm);
                }
                println!(
                    "{} {}: mean {:.6} ± {:.6} over {} seeds, {:.1} queries/round, {:.2?}",
                    r.dataset,
                    r.algorithm,
                    r.mean_loss,
                    r.std_loss,
                    r.surviving_count(),
                    r.queries_per_round,
                    r.wall_time
                );
            }
            for r in &output.reports {
                let regret: Vec<f64> = r
                    .survivors()
                    .filter_map(|(_, s)| s.regret.map(|g| g / s.run.losses.len() as f64))
                    .collect();
                if !regret.is_empty() {
                    let (m, _) = runner::mean_std(&regret);
                    println!("{} average regret per round: {m:.6}", r.algorithm);
                }
            }
            if let Some(d) = output.method().relative_decrease {
                println!("relative decrease: {:.2}%", 100.0 * d);
            }
            for path in write_outputs(&output, &out, &format)?.iter().take(format.len()) {
                println!("wrote {}", path.display());
            }
            if output.reports.iter().any(|r| r.failed) {
                bail!("fewer than half of the seeds survived");
            }
        }
        Cmd::FetchData { dataset, schemas, dir } => {
            let path = fetch::fetch(&dataset, &schemas, &dir)?;
            println!("{}", path.display());
        }
        Cmd::Tune { config, out } => {
            let cfg = ExperimentConfig::load(&config)?;
            let points = tune::tune(&cfg)?;
            let best = points[0];
            println!(
                "best: lr = {} c = {} N = {} delta = {} (first-half loss {:.6})",
                best.lr, best.c, best.n, best.delta, best.score
            );
            if let Some(out) = out {
                std::fs::write(&out, tune::to_csv(&points)?)?;
                println!("wrote {}", out.display());
            }
        }
    }
    Ok(())
}
