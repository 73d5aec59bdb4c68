//! Budgeted per-fold loss evaluation, the run history and CV aggregation.

use std::collections::HashMap;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value as Json};
use thiserror::Error;

use crate::dataspace::{Dataset, FoldPlan};
use crate::learners::{self, derive_seed, Budget, LearnError};
use crate::paramspace::{Config, ParamSpace};

/// Default per-fold training cap in instance-visit units.
pub const DEFAULT_FOLD_INSTANCES: u64 = 50_000_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvalError {
    #[error("no record for fold {0}")]
    MissingFold(usize),
    #[error("unknown config id {0}")]
    UnknownConfig(usize),
    #[error("duplicate record for config {config_id} fold {fold}")]
    DuplicateRecord { config_id: usize, fold: usize },
    #[error("malformed history line {line}: {reason}")]
    Malformed { line: usize, reason: String },
}

/// Loss of one config on one fold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldLossRecord {
    pub config_id: usize,
    pub fold: usize,
    pub loss: f64,
    pub budget_exhausted: bool,
    pub wall_time_ms: f64,
}

/// Outcome of evaluating a config on a fold, before it is tied to a history.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FoldOutcome {
    pub loss: f64,
    pub budget_exhausted: bool,
    pub wall_time_ms: f64,
}

/// Training limits applied to each fold evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FoldBudget {
    pub instances: Option<u64>,
    pub timeout: Option<Duration>,
}

impl Default for FoldBudget {
    fn default() -> Self {
        Self { instances: Some(DEFAULT_FOLD_INSTANCES), timeout: None }
    }
}

impl FoldBudget {
    pub fn unlimited() -> Self {
        Self { instances: None, timeout: None }
    }

    pub fn instances(n: u64) -> Self {
        Self { instances: Some(n), timeout: None }
    }

    fn start(&self) -> Budget {
        let budget = match self.instances {
            Some(n) => Budget::instances(n),
            None => Budget::unlimited(),
        };
        match self.timeout {
            Some(t) => budget.with_deadline(Instant::now() + t),
            None => budget,
        }
    }
}

/// Trains `config` on every fold but `fold` and returns its misclassification
/// rate on `fold`. Budget exhaustion and invalid configs score 1.0.
pub fn evaluate_fold(
    space: &ParamSpace,
    config: &Config,
    data: &Dataset,
    plan: &FoldPlan,
    fold: usize,
    budget: &FoldBudget,
    seed: u64,
) -> FoldOutcome {
    let start = Instant::now();
    let train = data.subset(&plan.train_indices(fold));
    let valid = data.subset(&plan.valid_indices(fold));
    let mut b = budget.start();
    let result = learners::train(space, config, &train, &mut b, derive_seed(seed, fold as u64))
        .and_then(|m| learners::misclassification_rate(&m, &valid));
    let (loss, budget_exhausted) = match result {
        Ok(l) => (l, false),
        Err(LearnError::BudgetExhausted) => (1.0, true),
        Err(_) => (1.0, false),
    };
    FoldOutcome { loss, budget_exhausted, wall_time_ms: start.elapsed().as_secs_f64() * 1e3 }
}

/// A loss function over (config, fold) pairs that an optimizer can query.
pub trait Objective: Sync {
    fn n_folds(&self) -> usize;
    fn evaluate(&self, config: &Config, fold: usize) -> FoldOutcome;
}

/// k-fold cross-validation of learner-space configs on a dataset.
pub struct CvObjective<'a> {
    pub space: &'a ParamSpace,
    pub data: &'a Dataset,
    pub plan: &'a FoldPlan,
    pub budget: FoldBudget,
    pub seed: u64,
}

impl Objective for CvObjective<'_> {
    fn n_folds(&self) -> usize {
        self.plan.k()
    }

    fn evaluate(&self, config: &Config, fold: usize) -> FoldOutcome {
        evaluate_fold(self.space, config, self.data, self.plan, fold, &self.budget, self.seed)
    }
}

/// Incumbent change recorded by an optimizer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryPoint {
    /// Fold evaluations spent when the change happened.
    pub evaluations: usize,
    pub config_id: usize,
    /// Mean loss of the new incumbent over its evaluated folds.
    pub mean_loss: f64,
    pub folds: Vec<usize>,
    /// Mean loss of the replaced incumbent over the same folds, if any.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub replaced_mean: Option<f64>,
}

/// Configs, append-only fold records and the incumbent trajectory of a run.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunHistory {
    configs: Vec<Config>,
    index: HashMap<Config, usize>,
    records: Vec<FoldLossRecord>,
    by_pair: HashMap<(usize, usize), usize>,
    folds_of: Vec<Vec<usize>>,
    trajectory: Vec<TrajectoryPoint>,
}

impl RunHistory {
    pub fn new() -> Self {
        Self::default()
    }

    /// Id of `config`, registering it if unseen.
    pub fn register(&mut self, config: Config) -> usize {
        if let Some(&id) = self.index.get(&config) {
            return id;
        }
        let id = self.configs.len();
        self.index.insert(config.clone(), id);
        self.configs.push(config);
        self.folds_of.push(Vec::new());
        id
    }

    pub fn id_of(&self, config: &Config) -> Option<usize> {
        self.index.get(config).copied()
    }

    pub fn config(&self, id: usize) -> &Config {
        &self.configs[id]
    }

    pub fn configs(&self) -> &[Config] {
        &self.configs
    }

    pub fn records(&self) -> &[FoldLossRecord] {
        &self.records
    }

    pub fn n_evaluations(&self) -> usize {
        self.records.len()
    }

    pub fn record(&mut self, rec: FoldLossRecord) -> Result<(), EvalError> {
        if rec.config_id >= self.configs.len() {
            return Err(EvalError::UnknownConfig(rec.config_id));
        }
        let key = (rec.config_id, rec.fold);
        if self.by_pair.contains_key(&key) {
            return Err(EvalError::DuplicateRecord { config_id: rec.config_id, fold: rec.fold });
        }
        self.by_pair.insert(key, self.records.len());
        self.folds_of[rec.config_id].push(rec.fold);
        self.records.push(rec);
        Ok(())
    }

    pub fn lookup(&self, config_id: usize, fold: usize) -> Option<&FoldLossRecord> {
        self.by_pair.get(&(config_id, fold)).map(|&i| &self.records[i])
    }

    /// Folds evaluated for a config, in evaluation order.
    pub fn folds_of(&self, config_id: usize) -> &[usize] {
        &self.folds_of[config_id]
    }

    /// Mean loss over every fold evaluated for the config.
    pub fn mean_loss(&self, config_id: usize) -> Option<f64> {
        let folds = self.folds_of.get(config_id)?;
        if folds.is_empty() {
            return None;
        }
        mean_cv_loss(self, config_id, folds).ok()
    }

    pub fn trajectory(&self) -> &[TrajectoryPoint] {
        &self.trajectory
    }

    pub fn push_trajectory(&mut self, point: TrajectoryPoint) {
        self.trajectory.push(point);
    }

    /// One JSON object per config, record and trajectory point, in that order.
    pub fn to_entries(&self, space: &ParamSpace) -> Vec<Json> {
        let mut out = Vec::new();
        for (id, c) in self.configs.iter().enumerate() {
            out.push(serde_json::json!({ "kind": "config", "id": id, "config": space.config_to_json(c) }));
        }
        for r in &self.records {
            let mut line = serde_json::to_value(r).expect("record serializes");
            line["kind"] = Json::from("record");
            out.push(line);
        }
        for t in &self.trajectory {
            let mut line = serde_json::to_value(t).expect("trajectory serializes");
            line["kind"] = Json::from("trajectory");
            out.push(line);
        }
        out
    }

    pub fn from_entries<'j>(
        space: &ParamSpace,
        entries: impl IntoIterator<Item = &'j Json>,
    ) -> Result<Self, EvalError> {
        let mut h = RunHistory::new();
        for (i, v) in entries.into_iter().enumerate() {
            let bad = |reason: String| EvalError::Malformed { line: i + 1, reason };
            match v.get("kind").and_then(Json::as_str) {
                Some("config") => {
                    let map: Map<String, Json> = v
                        .get("config")
                        .and_then(Json::as_object)
                        .cloned()
                        .ok_or_else(|| bad("missing config".into()))?;
                    let config = space.config_from_json(&map).map_err(|e| bad(e.to_string()))?;
                    h.register(config);
                }
                Some("record") => {
                    let r: FoldLossRecord = serde_json::from_value(v.clone()).map_err(|e| bad(e.to_string()))?;
                    h.record(r)?;
                }
                Some("trajectory") => {
                    let t: TrajectoryPoint = serde_json::from_value(v.clone()).map_err(|e| bad(e.to_string()))?;
                    h.push_trajectory(t);
                }
                _ => return Err(bad("unknown entry kind".into())),
            }
        }
        Ok(h)
    }

    /// Line-delimited JSON form of [`RunHistory::to_entries`].
    pub fn to_jsonl(&self, space: &ParamSpace) -> String {
        self.to_entries(space).iter().map(|e| format!("{e}\n")).collect()
    }

    pub fn from_jsonl(space: &ParamSpace, text: &str) -> Result<Self, EvalError> {
        let entries = text
            .lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty())
            .map(|(i, l)| {
                serde_json::from_str::<Json>(l).map_err(|e| EvalError::Malformed { line: i + 1, reason: e.to_string() })
            })
            .collect::<Result<Vec<_>, _>>()?;
        Self::from_entries(space, &entries)
    }
}

/// Arithmetic mean of the config's losses over `over`.
pub fn mean_cv_loss(history: &RunHistory, config_id: usize, over: &[usize]) -> Result<f64, EvalError> {
    if config_id >= history.configs.len() {
        return Err(EvalError::UnknownConfig(config_id));
    }
    let mut sum = 0.0;
    for &f in over {
        sum += history.lookup(config_id, f).ok_or(EvalError::MissingFold(f))?.loss;
    }
    Ok(if over.is_empty() { 0.0 } else { sum / over.len() as f64 })
}
