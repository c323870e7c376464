use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use hdmtl::dataset::SplitSpec;
use hdmtl::harness::{aggregate, emit_results, run_experiment, DataSource, ExperimentConfig};
use hdmtl::multitask::{memory_footprint, KeyStorage};
use hdmtl::{Method, Result};

#[derive(Parser)]
#[command(
    name = "hdmtl",
    version,
    about = "Multi-task hyperdimensional classification experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a sequential multi-task experiment and write curves.csv / summary.json.
    Run {
        /// TOML experiment configuration; built-in defaults when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Directory holding the MNIST IDX files (selects MNIST data).
        #[arg(long)]
        data_dir: Option<PathBuf>,
        #[arg(long, default_value = "results")]
        out_dir: PathBuf,
        #[arg(long)]
        runs: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        /// Comma-separated subset of baseline,tp-hdc,ideal.
        #[arg(long, value_delimiter = ',')]
        method: Option<Vec<Method>>,
        /// Task label sets such as "0,1|2,3|4,5".
        #[arg(long)]
        split: Option<SplitSpec>,
    },
    /// Print stored hypervector counts per method.
    Footprint {
        #[arg(long)]
        tasks: usize,
        #[arg(long)]
        classes: usize,
    },
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run {
            config,
            data_dir,
            out_dir,
            runs,
            seed,
            method,
            split,
        } => {
            let mut cfg = match config {
                Some(path) => ExperimentConfig::load(&path)?,
                None => ExperimentConfig::default(),
            };
            if let Some(dir) = data_dir {
                cfg.data = DataSource::Mnist { dir };
            }
            if let Some(n) = runs {
                cfg.runs = n;
            }
            if let Some(s) = seed {
                cfg.seed = s;
            }
            if let Some(m) = method {
                cfg.methods = m;
            }
            if let Some(s) = split {
                cfg.split = s;
            }
            cfg.validate()?;

            let result = run_experiment(&cfg)?;
            let (curves, summary) = emit_results(&cfg, &result, &out_dir)?;
            println!(
                "{:<10} {:>6} {:>8} {:>8} {:>10}",
                "method", "runs", "mean%", "std%", "task-std%"
            );
            for m in aggregate(&result).methods {
                println!(
                    "{:<10} {:>6} {:>8.2} {:>8.2} {:>10.2}",
                    m.method.as_str(),
                    m.runs,
                    100.0 * m.mean,
                    100.0 * m.std,
                    100.0 * m.task_std
                );
            }
            println!("wrote {} and {}", curves.display(), summary.display());
            Ok(())
        }
        Command::Footprint { tasks, classes } => {
            for method in Method::ALL {
                for storage in [KeyStorage::Stored, KeyStorage::Regenerated] {
                    if method != Method::TaskProjected && storage == KeyStorage::Regenerated {
                        continue;
                    }
                    let r = memory_footprint(method, tasks, classes, storage);
                    println!(
                        "{:<8} keys={:<11} class_vectors={:<5} key_vectors={:<5} total={}",
                        method.as_str(),
                        format!("{storage:?}").to_lowercase(),
                        r.class_vectors,
                        r.key_vectors,
                        r.total_vectors()
                    );
                }
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
