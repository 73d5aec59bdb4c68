use rand::Rng;

use super::*;
use crate::dataspace::numeric_dataset;
use crate::learners::rng_for;

/// Two noisy Gaussian blobs written as CSV.
fn blob_csv(dir: &Path, n: usize) -> PathBuf {
    let mut rng = rng_for(21, 0);
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    for i in 0..n {
        let y = i % 2;
        let c = if y == 0 { -1.0 } else { 1.0 };
        rows.push(vec![c + rng.random_range(-1.5..1.5), rng.random_range(-1.0..1.0)]);
        labels.push(y);
    }
    let path = dir.join("blobs.csv");
    numeric_dataset(rows, labels).unwrap().write_csv(&path).unwrap();
    path
}

fn small_config(path: PathBuf, methods: Vec<Method>) -> ExperimentConfig {
    ExperimentConfig {
        methods,
        k: 3,
        budget: 12,
        seeds: 2,
        batch: 2,
        bootstrap_samples: 500,
        workers: 2,
        ..ExperimentConfig::new(path, DataFormat::Csv)
    }
}

#[test]
fn methods_parse_with_either_separator() {
    assert_eq!("random-grid".parse::<Method>().unwrap(), Method::RandomGrid);
    assert_eq!("ex_def".parse::<Method>().unwrap(), Method::ExDef);
    assert_eq!("SMAC".parse::<Method>().unwrap(), Method::Smac);
    assert_eq!("hyperband".parse::<Method>().unwrap_err().exit_code(), 2);
    assert_eq!("arff".parse::<DataFormat>().unwrap(), DataFormat::Arff);
}

#[test]
fn config_validation() {
    let ok = small_config("x.csv".into(), vec![Method::Smac]);
    ok.validate().unwrap();
    for broken in [
        ExperimentConfig { batch: 3, ..ok.clone() },
        ExperimentConfig { budget: 2, ..ok.clone() },
        ExperimentConfig { test_fraction: 1.0, ..ok.clone() },
        ExperimentConfig { validation_fraction: 0.0, ..ok.clone() },
        ExperimentConfig { k: 1, ..ok.clone() },
        ExperimentConfig { methods: vec![], ..ok.clone() },
        ExperimentConfig { workers: 0, ..ok.clone() },
    ] {
        assert_eq!(broken.validate().unwrap_err().exit_code(), 2);
    }
}

#[test]
fn missing_data_is_a_data_error() {
    let cfg = small_config("/nonexistent/file.csv".into(), vec![Method::Random]);
    assert_eq!(run_experiment(&cfg).unwrap_err().exit_code(), 3);
}

#[test]
fn census_fixtures() {
    let space = learner_space();
    let roster = learner_roster(space);
    let knn = &roster.iter().find(|r| r.0 == "knn").unwrap().1;
    let nb = &roster.iter().find(|r| r.0 == "naive_bayes").unwrap().1;
    let bag = &roster.iter().find(|r| r.0 == "bagging").unwrap().1;
    let all_knn = classifier_census(space, &[knn, knn, knn]);
    assert_eq!(all_knn.fraction("knn"), 1.0);
    let split = classifier_census(space, &[knn, nb, knn, knn]);
    assert_eq!((split.fraction("knn"), split.fraction("naive_bayes")), (0.75, 0.25));
    assert_eq!(split.ranked(), vec![("knn", 3), ("naive_bayes", 1)]);
    let meta = classifier_census(space, &[bag]);
    assert_eq!(meta.learners["bagging"], 1);
    assert_eq!(meta.meta_bases["cart_tree"], 1);
}

#[test]
fn experiment_writes_reproducible_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let data = blob_csv(dir.path(), 90);
    let out = dir.path().join("out");
    let cfg = ExperimentConfig { out: Some(out.clone()), ..small_config(data, vec![Method::Random, Method::ExDef]) };
    let (report, records) = run_experiment(&cfg).unwrap();
    assert_eq!(records.len(), 3);
    assert_eq!(report.methods.len(), 2);
    assert_eq!(report.experiment.n_test + report.experiment.n_train + report.experiment.n_validation, 90);

    let ex = &report.methods[1];
    assert_eq!(ex.method, "ex_def");
    assert_eq!(ex.median_cv_loss, ex.cv_losses[0]);
    assert_eq!(ex.median_test_loss, ex.test_losses[0]);

    for r in &records {
        assert_eq!(r.overfit.config_ids.len(), r.result.history.trajectory().len());
        assert!((0.0..=1.0).contains(&r.test_loss));
    }

    let before = fs::read_to_string(out.join("report.json")).unwrap();
    let rebuilt = regenerate_report(&out).unwrap();
    assert_eq!(rebuilt, report);
    assert_eq!(fs::read_to_string(out.join("report.json")).unwrap(), before);
    assert!(fs::read_to_string(out.join("report.md")).unwrap().contains("| ex_def | 1 |"));
    assert!(out.join("runs/random-seed1.history.jsonl").exists());
}

#[test]
fn single_run_report_is_that_run() {
    let dir = tempfile::tempdir().unwrap();
    let data = blob_csv(dir.path(), 60);
    let cfg = ExperimentConfig { seeds: 1, batch: 1, ..small_config(data, vec![Method::Tpe]) };
    let (report, records) = run_experiment(&cfg).unwrap();
    let m = &report.methods[0];
    assert_eq!(m.median_cv_loss, records[0].result.final_cv_loss());
    assert_eq!(m.median_test_loss, records[0].test_loss);
}
