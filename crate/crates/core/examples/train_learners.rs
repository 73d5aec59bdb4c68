//! Train every default roster learner on Iris and report its test error.

use cash::baselines::learner_roster;
use cash::dataspace::{load_csv, split_train_test, LabelColumn};
use cash::learners::{learner_space, misclassification_rate, train, Budget};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/data/iris.csv");
    let data = load_csv(path, &LabelColumn::Last, true)?;
    let (train_set, test_set) = split_train_test(&data, 0.3, 0)?;
    let space = learner_space();
    for (name, config) in learner_roster(space) {
        let model = train(space, &config, &train_set, &mut Budget::unlimited(), 7)?;
        let err = misclassification_rate(&model, &test_set)?;
        println!("{name:<15} test error {:>5.1}%", 100.0 * err);
    }

    let tuned = space.config_from_pairs(&[
        ("is_base", "true"),
        ("feat_sel", "true"),
        ("base", "knn"),
        ("base.knn.k", "7"),
        ("base.knn.weighting", "inverse"),
        ("feat_search", "ranker"),
        ("feat_eval", "info_gain"),
        ("feat.ranker_keep_fraction", "0.5"),
    ])?;
    let model = train(space, &tuned, &train_set, &mut Budget::unlimited(), 7)?;
    println!("{}: test error {:.1}%", space.describe(&tuned), 100.0 * misclassification_rate(&model, &test_set)?);
    Ok(())
}
