//! SMAC on the synthetic benchmark: incumbent replacements and the final
//! incumbent compared with the known optimum.

use cash::smac::Smac;
use cash::smbo::{run_smbo, RandomSearch};
use cash::synthetic::{SyntheticCash, OPTIMUM};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let bench = SyntheticCash::new(5);
    let space = bench.space();
    let mut smac = Smac::default();
    let run = run_smbo(&mut smac, space, &bench, 300, 1, None)?;

    println!("incumbent replacements:");
    for r in smac.replacements() {
        println!(
            "  after {:>3} evals: config {:>3} -> {:>3} on folds {:?}, mean {:.4} -> {:.4}",
            r.evaluations, r.old, r.new, r.folds, r.old_mean, r.new_mean
        );
    }
    let climbs = smac.search_paths();
    let gained = climbs.iter().filter(|p| p.end_ei > p.start_ei).count();
    println!("{} local searches, {} improved EI", climbs.len(), gained);
    println!(
        "smac:   {} configs, final {} with true loss {:.4} (optimum {OPTIMUM})",
        run.history.configs().len(),
        space.describe(run.incumbent_config()),
        bench.true_loss(run.incumbent_config())
    );

    let random = run_smbo(&mut RandomSearch::default(), space, &bench, 300, 1, None)?;
    println!("random: final true loss {:.4}", bench.true_loss(random.incumbent_config()));
    Ok(())
}
