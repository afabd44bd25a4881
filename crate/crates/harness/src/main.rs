use std::path::PathBuf;

use anyhow::Context;
use clap::{Parser, Subcommand};
use iacv::datagen::{gen_logistic, write_csv};
use iacv_harness::{compare_runtime, plot, run_experiment, ExperimentConfig};

#[derive(Parser)]
#[command(name = "iacv", version, about = "Approximate leave-one-out cross-validation experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment and write metrics.csv, summary.csv, timing.csv.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Overrides `output_dir` from the config.
        #[arg(long)]
        output_dir: Option<PathBuf>,
    },
    /// Median per-iteration time of exact tracking against IACV.
    CompareRuntime {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        iterations: Option<usize>,
    },
    /// Log-log SVG of a metric from summary.csv or metrics.csv.
    Plot {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value = "err_approx")]
        metric: String,
    },
    /// Write a synthetic logistic dataset as CSV.
    GenData {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        p: usize,
        #[arg(long)]
        s: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

fn main() -> anyhow::Result<()> {
    match Cli::parse().command {
        Command::Run { config, output_dir } => {
            let mut cfg = ExperimentConfig::load(&config)?;
            if let Some(dir) = output_dir {
                cfg.output_dir = dir;
            }
            let outcome = run_experiment(&cfg)?;
            outcome.write(&cfg.output_dir).with_context(|| format!("writing {}", cfg.output_dir.display()))?;
            let failed = outcome.failed_trials();
            println!("wrote {} ({} trials, {} rows)", cfg.output_dir.display(), cfg.trials, outcome.metrics.len());
            println!("checksum {}", outcome.checksum);
            if !failed.is_empty() {
                eprintln!("trials failed: {failed:?} (see rows with method = error)");
            }
        }
        Command::CompareRuntime { config, iterations } => {
            let cfg = ExperimentConfig::load(&config)?;
            println!("{}", compare_runtime(&cfg, iterations)?);
        }
        Command::Plot { input, out, metric } => {
            plot::plot_file(&input, &out, &metric)?;
            println!("wrote {}", out.display());
        }
        Command::GenData { n, p, s, seed, out } => {
            let (data, _) = gen_logistic::<f64>(n, p, s, seed)?;
            write_csv(&data, &out)?;
            println!("wrote {}", out.display());
        }
    }
    Ok(())
}
