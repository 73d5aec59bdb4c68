//! Ex-Def and Random Grid on the inner training split of Iris.

use cash::baselines::{ex_def, learner_roster, RandomGrid};
use cash::dataspace::{load_csv, split_train_test, stratified_folds, LabelColumn};
use cash::evaluator::{CvObjective, FoldBudget};
use cash::learners::learner_space;
use cash::smbo::run_smbo;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/data/iris.csv");
    let data = load_csv(path, &LabelColumn::Last, true)?;
    let (train, _test) = split_train_test(&data, 0.3, 0)?;
    let plan = stratified_folds(&train, 5, 0)?;
    let space = learner_space();
    let objective = CvObjective { space, data: &train, plan: &plan, budget: FoldBudget::default(), seed: 0 };

    let exdef = ex_def(&learner_roster(space), &objective, 0);
    for (name, loss) in &exdef.table {
        println!("{name:<15} {:>5.2}%", 100.0 * loss);
    }
    println!("ex_def picks {} ({:.2}%)", exdef.best_name(), 100.0 * exdef.result.final_cv_loss());

    let mut grid = RandomGrid::for_learners(space);
    println!("grid union holds {} configs", grid.grid().size());
    let run = run_smbo(&mut grid, space, &objective, 150, 0, None)?;
    println!(
        "random grid: {} ({:.2}%) after {} configs",
        space.describe(run.incumbent_config()),
        100.0 * run.final_cv_loss(),
        run.history.configs().len()
    );
    Ok(())
}
