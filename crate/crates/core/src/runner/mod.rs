//! Experiment orchestration: nested train/test splits, seeded optimizer runs
//! fanned out over a worker pool, final retraining and test evaluation,
//! bootstrap reduction and the report artifacts.

mod bootstrap;
mod report;

use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value as Json};
use thiserror::Error;

use crate::baselines::{ex_def, learner_roster, RandomGrid};
use crate::dataspace::{load_arff, load_csv, split_train_test, stratified_folds, DataError, Dataset, LabelColumn};
use crate::evaluator::{CvObjective, FoldBudget, DEFAULT_FOLD_INSTANCES};
use crate::learners::{learner_space, misclassification_rate, train, Budget};
use crate::paramspace::{Config, ParamSpace};
use crate::smac::Smac;
use crate::smbo::{overfit_signal, run_smbo, OptimizerStrategy, OverfitSignal, RandomSearch, RunResult, SmboError};
use crate::tpe::Tpe;

pub use bootstrap::{batch_winner, bootstrap_medians, lower_median, BootstrapMedians, DEFAULT_SAMPLES};
pub use report::{build_report, classifier_census, learner_label, Census, MethodReport, Report};

pub const DEFAULT_WORKERS: usize = 4;

#[derive(Debug, Error)]
pub enum RunnerError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("data error: {0}")]
    Data(#[from] DataError),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("bad artifact {path}: {reason}")]
    Artifact { path: PathBuf, reason: String },
    #[error(transparent)]
    Smbo(#[from] SmboError),
}

impl RunnerError {
    /// Process exit code for the CLI.
    pub fn exit_code(&self) -> i32 {
        match self {
            RunnerError::Config(_) => 2,
            RunnerError::Data(_) => 3,
            _ => 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Smac,
    Tpe,
    Random,
    RandomGrid,
    ExDef,
}

impl Method {
    pub const ALL: [Method; 5] = [Method::Smac, Method::Tpe, Method::Random, Method::RandomGrid, Method::ExDef];

    pub fn name(self) -> &'static str {
        match self {
            Method::Smac => "smac",
            Method::Tpe => "tpe",
            Method::Random => "random",
            Method::RandomGrid => "random_grid",
            Method::ExDef => "ex_def",
        }
    }

    pub fn is_deterministic(self) -> bool {
        self == Method::ExDef
    }

    fn strategy(self, space: &ParamSpace) -> Box<dyn OptimizerStrategy> {
        match self {
            Method::Smac => Box::new(Smac::default()),
            Method::Tpe => Box::new(Tpe::default()),
            Method::Random => Box::new(RandomSearch::default()),
            Method::RandomGrid => Box::new(RandomGrid::for_learners(space)),
            Method::ExDef => unreachable!("ex_def is not an SMBO strategy"),
        }
    }
}

impl FromStr for Method {
    type Err = RunnerError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let norm = s.trim().to_ascii_lowercase().replace('-', "_");
        Method::ALL
            .into_iter()
            .find(|m| m.name() == norm)
            .ok_or_else(|| RunnerError::Config(format!("unknown method `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DataFormat {
    Csv,
    Arff,
}

impl FromStr for DataFormat {
    type Err = RunnerError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(DataFormat::Csv),
            "arff" => Ok(DataFormat::Arff),
            _ => Err(RunnerError::Config(format!("unknown data format `{s}`"))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub data: PathBuf,
    pub format: DataFormat,
    /// CSV label column; the last column when `None`.
    pub label: Option<String>,
    pub methods: Vec<Method>,
    pub k: usize,
    /// Fold evaluations per run.
    pub budget: usize,
    pub seeds: usize,
    pub batch: usize,
    pub bootstrap_samples: usize,
    pub test_fraction: f64,
    pub validation_fraction: f64,
    /// Seeds the splits, the learners and the bootstrap; run `i` uses `seed + i`.
    pub seed: u64,
    pub workers: usize,
    /// Instance budget of one training call.
    pub fold_instances: Option<u64>,
    /// Optional wall-clock cap per run; runs hitting it are not reproducible.
    pub run_time_limit: Option<Duration>,
    pub out: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn new(data: impl Into<PathBuf>, format: DataFormat) -> Self {
        Self {
            data: data.into(),
            format,
            label: None,
            methods: vec![Method::Smac],
            k: 10,
            budget: 200,
            seeds: 4,
            batch: 4,
            bootstrap_samples: DEFAULT_SAMPLES,
            test_fraction: 0.3,
            validation_fraction: 0.3,
            seed: 0,
            workers: DEFAULT_WORKERS,
            fold_instances: Some(DEFAULT_FOLD_INSTANCES),
            run_time_limit: None,
            out: None,
        }
    }

    pub fn validate(&self) -> Result<(), RunnerError> {
        let bad = |m: String| Err(RunnerError::Config(m));
        if self.methods.is_empty() {
            return bad("no methods given".into());
        }
        if self.k < 2 {
            return bad(format!("need at least 2 folds, got {}", self.k));
        }
        if self.budget < self.k {
            return bad(format!("budget {} is smaller than the fold count {}", self.budget, self.k));
        }
        if self.seeds == 0 || self.batch == 0 || self.batch > self.seeds {
            return bad(format!("batch size {} must lie in 1..={} (the seed count)", self.batch, self.seeds));
        }
        for (name, f) in [("test", self.test_fraction), ("validation", self.validation_fraction)] {
            if !(f > 0.0 && f < 1.0) {
                return bad(format!("{name} fraction {f} not in (0,1)"));
            }
        }
        if self.workers == 0 {
            return bad("need at least one worker".into());
        }
        if self.bootstrap_samples == 0 {
            return bad("need at least one bootstrap sample".into());
        }
        Ok(())
    }

    pub fn load_data(&self) -> Result<Dataset, RunnerError> {
        Ok(match self.format {
            DataFormat::Csv => {
                let label = self.label.clone().map_or(LabelColumn::Last, LabelColumn::Name);
                load_csv(&self.data, &label, true)?
            }
            DataFormat::Arff => load_arff(&self.data)?,
        })
    }
}

/// Everything a report needs besides the run records.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentMeta {
    pub dataset: String,
    pub n_train: usize,
    pub n_validation: usize,
    pub n_test: usize,
    pub k: usize,
    pub budget: usize,
    pub batch: usize,
    pub bootstrap_samples: usize,
    pub seed: u64,
    pub methods: Vec<String>,
}

/// The test split. Only [`HeldOut::test_loss`] can read it, and it is never
/// handed to an optimizer.
pub struct HeldOut {
    test: Dataset,
}

impl HeldOut {
    pub fn new(test: Dataset) -> Self {
        Self { test }
    }

    pub fn len(&self) -> usize {
        self.test.len()
    }

    pub fn is_empty(&self) -> bool {
        self.test.is_empty()
    }

    /// Retrains `config` on `train` and returns its test error (1 if training fails).
    pub fn test_loss(&self, space: &ParamSpace, config: &Config, train: &Dataset, budget: &FoldBudget, seed: u64) -> f64 {
        holdout_loss(space, config, train, &self.test, budget, seed)
    }
}

fn holdout_loss(space: &ParamSpace, config: &Config, train_on: &Dataset, score_on: &Dataset, budget: &FoldBudget, seed: u64) -> f64 {
    let mut b = match budget.instances {
        Some(n) => Budget::instances(n),
        None => Budget::unlimited(),
    };
    if let Some(t) = budget.timeout {
        b = b.with_deadline(Instant::now() + t);
    }
    train(space, config, train_on, &mut b, seed)
        .and_then(|m| misclassification_rate(&m, score_on))
        .unwrap_or(1.0)
}

/// One optimizer run plus its held-out scores.
#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub result: RunResult,
    pub test_loss: f64,
    pub overfit: OverfitSignal,
}

impl RunRecord {
    pub fn to_json(&self, space: &ParamSpace) -> Json {
        let mut v = self.result.to_json(space);
        v["test_loss"] = json!(self.test_loss);
        v["overfit"] = json!({
            "config_ids": self.overfit.config_ids,
            "cv_losses": self.overfit.cv_losses,
            "validation_losses": self.overfit.validation_losses,
            "rho": self.overfit.rho,
        });
        v
    }

    pub fn from_json(space: &ParamSpace, v: &Json) -> Result<Self, String> {
        let result = RunResult::from_json(space, v).map_err(|e| e.to_string())?;
        let test_loss = v.get("test_loss").and_then(Json::as_f64).ok_or("missing `test_loss`")?;
        let o = v.get("overfit").ok_or("missing `overfit`")?;
        let floats = |key: &str| -> Result<Vec<f64>, String> {
            o.get(key)
                .and_then(Json::as_array)
                .ok_or(format!("missing `overfit.{key}`"))?
                .iter()
                .map(|x| x.as_f64().ok_or(format!("bad `overfit.{key}`")))
                .collect()
        };
        let config_ids = o
            .get("config_ids")
            .and_then(Json::as_array)
            .ok_or("missing `overfit.config_ids`")?
            .iter()
            .map(|x| x.as_u64().map(|u| u as usize).ok_or("bad `overfit.config_ids`".to_string()))
            .collect::<Result<_, _>>()?;
        let overfit = OverfitSignal {
            config_ids,
            cv_losses: floats("cv_losses")?,
            validation_losses: floats("validation_losses")?,
            rho: o.get("rho").and_then(Json::as_f64),
        };
        Ok(Self { result, test_loss, overfit })
    }

    pub fn file_stem(&self) -> String {
        format!("{}-seed{}", self.result.method, self.result.seed)
    }
}

/// Runs the experiment, writes artifacts when `cfg.out` is set, and returns
/// the report together with the raw run records.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<(Report, Vec<RunRecord>), RunnerError> {
    cfg.validate()?;
    let data = cfg.load_data()?;
    let space = learner_space();

    let (outer_train, test) = split_train_test(&data, cfg.test_fraction, cfg.seed)?;
    let held_out = HeldOut::new(test);
    let (inner_train, validation) = split_train_test(&outer_train, cfg.validation_fraction, cfg.seed.wrapping_add(1))?;
    let plan = stratified_folds(&inner_train, cfg.k, cfg.seed)?;
    let fold_budget = FoldBudget { instances: cfg.fold_instances, timeout: None };
    let objective = CvObjective { space, data: &inner_train, plan: &plan, budget: fold_budget, seed: cfg.seed };

    let mut jobs: Vec<(Method, u64)> = Vec::new();
    for &m in &cfg.methods {
        let n = if m.is_deterministic() { 1 } else { cfg.seeds };
        jobs.extend((0..n as u64).map(|i| (m, cfg.seed + i)));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers)
        .build()
        .map_err(|e| RunnerError::Config(format!("worker pool: {e}")))?;
    let records = pool.install(|| {
        jobs.par_iter()
            .map(|&(method, seed)| {
                let result = if method == Method::ExDef {
                    ex_def(&learner_roster(space), &objective, seed).result
                } else {
                    let deadline = cfg.run_time_limit.map(|t| Instant::now() + t);
                    run_smbo(method.strategy(space).as_mut(), space, &objective, cfg.budget, seed, deadline)?
                };
                let test_loss = held_out.test_loss(space, result.incumbent_config(), &outer_train, &fold_budget, cfg.seed);
                let overfit = overfit_signal(&result.history, |c| {
                    holdout_loss(space, c, &inner_train, &validation, &fold_budget, cfg.seed)
                });
                Ok(RunRecord { result, test_loss, overfit })
            })
            .collect::<Result<Vec<_>, RunnerError>>()
    })?;

    let meta = ExperimentMeta {
        dataset: data.name().to_string(),
        n_train: inner_train.len(),
        n_validation: validation.len(),
        n_test: held_out.len(),
        k: cfg.k,
        budget: cfg.budget,
        batch: cfg.batch,
        bootstrap_samples: cfg.bootstrap_samples,
        seed: cfg.seed,
        methods: cfg.methods.iter().map(|m| m.name().to_string()).collect(),
    };
    let report = build_report(space, &meta, &records);
    if let Some(out) = &cfg.out {
        write_artifacts(out, space, &meta, &records, &report)?;
    }
    Ok((report, records))
}

fn artifact_error(path: &Path, reason: impl ToString) -> RunnerError {
    RunnerError::Artifact { path: path.to_path_buf(), reason: reason.to_string() }
}

fn write_json(path: &Path, v: &impl Serialize) -> Result<(), RunnerError> {
    let text = serde_json::to_string_pretty(v).map_err(|e| artifact_error(path, e))?;
    fs::write(path, text + "\n")?;
    Ok(())
}

/// Layout: `experiment.json`, `runs/<method>-seed<s>.json` with the matching
/// `.history.jsonl`, `report.json` and `report.md`.
pub fn write_artifacts(
    out: &Path,
    space: &ParamSpace,
    meta: &ExperimentMeta,
    records: &[RunRecord],
    report: &Report,
) -> Result<(), RunnerError> {
    let runs = out.join("runs");
    fs::create_dir_all(&runs)?;
    write_json(&out.join("experiment.json"), meta)?;
    for r in records {
        write_json(&runs.join(format!("{}.json", r.file_stem())), &r.to_json(space))?;
        fs::write(runs.join(format!("{}.history.jsonl", r.file_stem())), r.result.history.to_jsonl(space))?;
    }
    write_report(out, report)
}

pub fn write_report(out: &Path, report: &Report) -> Result<(), RunnerError> {
    write_json(&out.join("report.json"), report)?;
    fs::write(out.join("report.md"), report.to_markdown())?;
    Ok(())
}

/// Reads `experiment.json` and every run record under `runs/`.
pub fn load_artifacts(dir: &Path, space: &ParamSpace) -> Result<(ExperimentMeta, Vec<RunRecord>), RunnerError> {
    let meta_path = dir.join("experiment.json");
    let text = fs::read_to_string(&meta_path)?;
    let meta: ExperimentMeta = serde_json::from_str(&text).map_err(|e| artifact_error(&meta_path, e))?;
    let mut paths: Vec<PathBuf> = fs::read_dir(dir.join("runs"))?
        .map(|e| e.map(|e| e.path()))
        .collect::<Result<_, _>>()?;
    paths.retain(|p| p.extension().is_some_and(|x| x == "json"));
    paths.sort();
    let mut records = Vec::with_capacity(paths.len());
    for p in paths {
        let v: Json = serde_json::from_str(&fs::read_to_string(&p)?).map_err(|e| artifact_error(&p, e))?;
        records.push(RunRecord::from_json(space, &v).map_err(|e| artifact_error(&p, e))?);
    }
    Ok((meta, records))
}

/// Rebuilds the report from the artifacts in `dir` and rewrites it.
pub fn regenerate_report(dir: &Path) -> Result<Report, RunnerError> {
    let space = learner_space();
    let (meta, records) = load_artifacts(dir, space)?;
    let report = build_report(space, &meta, &records);
    write_report(dir, &report)?;
    Ok(report)
}

#[cfg(test)]
mod tests;
