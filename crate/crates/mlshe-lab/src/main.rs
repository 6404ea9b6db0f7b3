use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use mlshe_lab::config::ExperimentConfig;
use mlshe_lab::report::{report_dir, summarize};
use mlshe_lab::rows::write_artifacts;
use mlshe_lab::suites::run_experiment;

#[derive(Parser)]
#[command(name = "mlshe-lab", about = "verification lab for the multilayer heat hierarchy")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment named in the config and write result artifacts.
    Run {
        /// plain-text sectioned key=value configuration file
        #[arg(long)]
        config: PathBuf,
        /// worker pool size (default: all cores)
        #[arg(long)]
        threads: Option<usize>,
        /// output directory (overrides the config)
        #[arg(long)]
        out: Option<PathBuf>,
        /// master seed (overrides the config)
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Summarize a results directory.
    Report {
        /// directory containing results.csv
        #[arg(long = "in")]
        input: PathBuf,
    },
}

fn main() -> ExitCode {
    match run() {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn run() -> mlshe_core::error::Result<ExitCode> {
    let cli = Cli::parse();
    match cli.command {
        Command::Run {
            config,
            threads,
            out,
            seed,
        } => {
            let mut cfg = ExperimentConfig::load(&config)?;
            if let Some(s) = seed {
                cfg.master_seed = s;
            }
            if let Some(dir) = out {
                cfg.out_dir = dir.to_string_lossy().into_owned();
            }
            if let Some(k) = threads {
                rayon::ThreadPoolBuilder::new()
                    .num_threads(k)
                    .build_global()
                    .map_err(|e| {
                        mlshe_core::error::Error::config(format!("thread pool: {e}"))
                    })?;
            }
            let output = run_experiment(&cfg)?;
            let out_dir = PathBuf::from(&cfg.out_dir);
            write_artifacts(
                &out_dir,
                &output.rows,
                &output.timings,
                &output.ledger,
                &cfg.to_text(),
            )?;
            let summary = summarize(&output.rows);
            print!("{}", summary.text);
            println!("artifacts written to {}", out_dir.display());
            Ok(if summary.failures == 0 {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            })
        }
        Command::Report { input } => {
            let summary = report_dir(&input)?;
            print!("{}", summary.text);
            Ok(if summary.failures == 0 {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            })
        }
    }
}
