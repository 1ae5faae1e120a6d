use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use scaleresp::commands::{self, Global, InputFailure, EXIT_INPUT};
use scaleresp_core::responsiveness::Metric;

/// Responsiveness of rater groups to item severity on ordinal scales.
#[derive(Debug, Parser)]
#[command(name = "scaleresp", version)]
struct Cli {
    /// Run configuration (JSON).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides every seed in the configuration.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads; defaults to the number of CPUs.
    #[arg(long, global = true)]
    workers: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Check inputs and print diagnostics.
    Validate,
    /// Per-group metrics with intervals, written as report.json and report.csv.
    Metrics,
    /// Permutation test of a metric between two groups.
    Compare {
        #[arg(long)]
        group_a: String,
        #[arg(long)]
        group_b: String,
        #[arg(long, default_value = "hm")]
        metric: Metric,
    },
    /// Curve tables and SVG charts.
    Curves {
        /// Group key such as `gender=Woman,age=18-24`; defaults to every configured group.
        #[arg(long)]
        group: Option<String>,
    },
    /// Synthetic scenario study; --config takes a simulation config.
    Simulate,
    /// Top raters by hm within each group.
    SelectRaters {
        #[arg(long)]
        per_group: Option<usize>,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    if let Some(n) = cli.workers {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_INPUT as u8);
        }
    }
    let global = Global {
        config: cli.config,
        seed: cli.seed,
        out: cli.out,
    };
    let result = match &cli.command {
        Command::Validate => commands::validate(&global),
        Command::Metrics => commands::metrics(&global),
        Command::Compare {
            group_a,
            group_b,
            metric,
        } => commands::compare(&global, group_a, group_b, *metric),
        Command::Curves { group } => commands::curves(&global, group.as_deref()),
        Command::Simulate => commands::simulate(&global),
        Command::SelectRaters { per_group } => commands::select(&global, *per_group),
    };
    match result {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            match e.downcast_ref::<InputFailure>() {
                Some(f) => eprintln!("input error:\n{f}"),
                None => eprintln!("error: {e:#}"),
            }
            ExitCode::from(EXIT_INPUT as u8)
        }
    }
}
