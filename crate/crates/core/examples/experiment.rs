//! A complete small experiment on the 1000-instance fixture: every method,
//! four seeds, bootstrap report written to a temporary directory.

use cash::runner::{run_experiment, DataFormat, ExperimentConfig, Method};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/data/mixed1000.arff");
    let out = std::env::temp_dir().join("cash-experiment");
    let cfg = ExperimentConfig {
        methods: Method::ALL.to_vec(),
        k: 5,
        budget: 60,
        seeds: 4,
        batch: 4,
        bootstrap_samples: 10_000,
        out: Some(out.clone()),
        ..ExperimentConfig::new(path, DataFormat::Arff)
    };
    let (report, _) = run_experiment(&cfg)?;
    print!("{}", report.to_markdown());
    println!("\nartifacts in {}", out.display());
    Ok(())
}
