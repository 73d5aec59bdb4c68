//! Load the bundled datasets and build the nested splits used by experiments.

use cash::dataspace::{load_arff, load_csv, split_train_test, stratified_folds, LabelColumn};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let data_dir = concat!(env!("CARGO_MANIFEST_DIR"), "/data");
    let iris = load_csv(format!("{data_dir}/iris.csv"), &LabelColumn::Name("class".into()), true)?;
    let mixed = load_arff(format!("{data_dir}/mixed1000.arff"))?;

    for data in [&iris, &mixed] {
        println!(
            "{}: {} instances, {} attributes, classes {:?} with counts {:?}",
            data.name(),
            data.len(),
            data.n_attributes(),
            data.class_names(),
            data.class_counts()
        );
        let (train, test) = split_train_test(data, 0.3, 0)?;
        let (inner, validation) = split_train_test(&train, 0.3, 1)?;
        let plan = stratified_folds(&inner, 10, 0)?;
        println!(
            "  train {} (inner {} + validation {}), test {}; fold sizes {:?}",
            train.len(),
            inner.len(),
            validation.len(),
            test.len(),
            plan.fold_sizes()
        );
    }
    Ok(())
}
