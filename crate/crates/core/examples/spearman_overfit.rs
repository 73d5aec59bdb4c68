//! Does a lower CV loss along the SMAC trajectory mean a lower validation
//! loss? Rank correlation of the two per incumbent.

use cash::dataspace::{load_arff, split_train_test, stratified_folds};
use cash::evaluator::{CvObjective, FoldBudget};
use cash::learners::{learner_space, misclassification_rate, train, Budget};
use cash::smac::Smac;
use cash::smbo::{overfit_signal, run_smbo};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let data = load_arff(concat!(env!("CARGO_MANIFEST_DIR"), "/data/mixed1000.arff"))?;
    let (train_set, _test) = split_train_test(&data, 0.3, 0)?;
    let (inner, validation) = split_train_test(&train_set, 0.3, 1)?;
    let plan = stratified_folds(&inner, 5, 0)?;
    let space = learner_space();
    let objective = CvObjective { space, data: &inner, plan: &plan, budget: FoldBudget::default(), seed: 0 };
    let run = run_smbo(&mut Smac::default(), space, &objective, 150, 4, None)?;

    let signal = overfit_signal(&run.history, |c| {
        train(space, c, &inner, &mut Budget::unlimited(), 0)
            .and_then(|m| misclassification_rate(&m, &validation))
            .unwrap_or(1.0)
    });
    for ((id, cv), val) in signal.config_ids.iter().zip(&signal.cv_losses).zip(&signal.validation_losses) {
        println!("config {id:>3}: cv {:>5.2}%  validation {:>5.2}%", 100.0 * cv, 100.0 * val);
    }
    match signal.rho {
        Some(r) => println!("spearman rho = {r:.3}"),
        None => println!("rho undefined (fewer than two distinct incumbents)"),
    }
    Ok(())
}
