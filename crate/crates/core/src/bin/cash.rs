use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use cash::learners::learner_space;
use cash::runner::{regenerate_report, run_experiment, DataFormat, ExperimentConfig, Method, RunnerError, DEFAULT_SAMPLES};

#[derive(Parser)]
#[command(name = "cash", version, about = "Combined algorithm selection and hyperparameter optimization")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run optimizers on a dataset and write the report.
    Run(RunArgs),
    /// Rebuild report.json and report.md from a run directory.
    Report {
        #[arg(long = "in")]
        dir: PathBuf,
    },
    /// Show the learner search space.
    Space {
        /// Print the full space document as JSON.
        #[arg(long)]
        print: bool,
    },
}

#[derive(clap::Args)]
struct RunArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long, default_value = "csv")]
    format: DataFormat,
    /// CSV label column name (default: last column).
    #[arg(long)]
    label: Option<String>,
    /// One or more of smac, tpe, random, random-grid, ex-def.
    #[arg(long, value_delimiter = ',', default_value = "smac")]
    method: Vec<Method>,
    #[arg(long, default_value_t = 10)]
    k: usize,
    /// Fold evaluations per run.
    #[arg(long, default_value_t = 200)]
    budget: usize,
    #[arg(long, default_value_t = 25)]
    seeds: usize,
    #[arg(long, default_value_t = 4)]
    batch: usize,
    #[arg(long, default_value_t = DEFAULT_SAMPLES)]
    bootstrap_samples: usize,
    #[arg(long, default_value_t = 0.3)]
    test_fraction: f64,
    #[arg(long, default_value_t = 0.3)]
    validation_fraction: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, env = "CASH_WORKERS", default_value_t = cash::runner::DEFAULT_WORKERS)]
    workers: usize,
    #[arg(long)]
    out: PathBuf,
}

fn run(args: RunArgs) -> Result<(), RunnerError> {
    let cfg = ExperimentConfig {
        label: args.label,
        methods: args.method,
        k: args.k,
        budget: args.budget,
        seeds: args.seeds,
        batch: args.batch,
        bootstrap_samples: args.bootstrap_samples,
        test_fraction: args.test_fraction,
        validation_fraction: args.validation_fraction,
        seed: args.seed,
        workers: args.workers,
        out: Some(args.out),
        ..ExperimentConfig::new(args.data, args.format)
    };
    let (report, _) = run_experiment(&cfg)?;
    print!("{}", report.to_markdown());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Run(args) => run(args),
        Command::Report { dir } => regenerate_report(&dir).map(|r| print!("{}", r.to_markdown())),
        Command::Space { print } => {
            let space = learner_space();
            if print {
                println!("{}", space.to_json());
            } else {
                let c = space.census();
                println!(
                    "{} parameters ({} categorical, {} numeric, {} conditional), depth {}",
                    c.parameters, c.categorical, c.numeric, c.conditional, c.max_depth
                );
            }
            Ok(())
        }
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
