//! From-scratch classifiers, meta-learners, voting ensembles and feature
//! selection, plus the conditional space that ties them together.
//!
//! Every learner accepts weighted samples so AdaBoostM1 can reweight instead
//! of resample. Training charges a [`Budget`] in instance-visit units; running
//! out aborts with [`LearnError::BudgetExhausted`].

mod featsel;
mod meta;
mod models;
mod space;
mod tree;

use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataspace::Dataset;
use crate::paramspace::{Config, ParamSpace};

pub use featsel::{
    info_gain_scores, pearson_scores, select_features, FeatSelConfig, FeatureEvaluator,
    FeatureSearch, FeatureSelector, INFO_GAIN_BINS,
};
pub use space::{
    decode, default_pipeline, ex_def_roster, learner_space, space_of_learners, BASE_LEARNERS,
    BASE_SLOTS, MAX_VOTING_BASES,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LearnError {
    #[error("training budget exhausted")]
    BudgetExhausted,
    #[error("expected {expected} attributes, got {got}")]
    ArityMismatch { expected: usize, got: usize },
    #[error("invalid learner configuration: {0}")]
    InvalidConfig(String),
}

/// Instance-evaluation budget for one training call, optionally with a
/// wall-clock deadline.
#[derive(Debug, Clone)]
pub struct Budget {
    remaining: Option<u64>,
    deadline: Option<Instant>,
}

impl Budget {
    pub fn unlimited() -> Self {
        Self { remaining: None, deadline: None }
    }

    pub fn instances(n: u64) -> Self {
        Self { remaining: Some(n), deadline: None }
    }

    pub fn with_deadline(mut self, deadline: Instant) -> Self {
        self.deadline = Some(deadline);
        self
    }

    pub fn remaining(&self) -> Option<u64> {
        self.remaining
    }

    pub fn charge(&mut self, units: u64) -> Result<(), LearnError> {
        if let Some(r) = self.remaining.as_mut() {
            if *r < units {
                *r = 0;
                return Err(LearnError::BudgetExhausted);
            }
            *r -= units;
        }
        if let Some(d) = self.deadline {
            if Instant::now() >= d {
                return Err(LearnError::BudgetExhausted);
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LearnerId {
    ZeroR,
    OneR,
    DecisionStump,
    Knn,
    NaiveBayes,
    LogisticSgd,
    CartTree,
    RandomForest,
    AdaboostM1,
    Bagging,
    Voting,
}

impl LearnerId {
    pub fn name(self) -> &'static str {
        match self {
            LearnerId::ZeroR => "zero_r",
            LearnerId::OneR => "one_r",
            LearnerId::DecisionStump => "decision_stump",
            LearnerId::Knn => "knn",
            LearnerId::NaiveBayes => "naive_bayes",
            LearnerId::LogisticSgd => "logistic_sgd",
            LearnerId::CartTree => "cart_tree",
            LearnerId::RandomForest => "random_forest",
            LearnerId::AdaboostM1 => "adaboost_m1",
            LearnerId::Bagging => "bagging",
            LearnerId::Voting => "voting",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        [
            LearnerId::ZeroR,
            LearnerId::OneR,
            LearnerId::DecisionStump,
            LearnerId::Knn,
            LearnerId::NaiveBayes,
            LearnerId::LogisticSgd,
            LearnerId::CartTree,
            LearnerId::RandomForest,
            LearnerId::AdaboostM1,
            LearnerId::Bagging,
            LearnerId::Voting,
        ]
        .into_iter()
        .find(|l| l.name() == name)
    }

    pub fn is_meta(self) -> bool {
        matches!(self, LearnerId::AdaboostM1 | LearnerId::Bagging)
    }

    pub fn is_ensemble(self) -> bool {
        self == LearnerId::Voting
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SplitCriterion {
    Gini,
    Entropy,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KnnWeighting {
    Uniform,
    InverseDistance,
}

/// Fully decoded learner with its hyperparameters.
#[derive(Debug, Clone, PartialEq)]
pub enum LearnerSpec {
    ZeroR,
    OneR { min_bucket: usize },
    DecisionStump,
    Knn { k: usize, weighting: KnnWeighting },
    NaiveBayes { discretize: bool },
    LogisticSgd { learning_rate: f64, epochs: usize, l2: f64 },
    CartTree { max_depth: usize, min_leaf: usize, criterion: SplitCriterion },
    RandomForest { trees: usize, feature_fraction: f64, max_depth: usize },
    AdaboostM1 { iterations: usize, base: Box<LearnerSpec> },
    Bagging { iterations: usize, bag_fraction: f64, base: Box<LearnerSpec> },
    Voting { bases: Vec<LearnerSpec> },
}

impl LearnerSpec {
    pub fn id(&self) -> LearnerId {
        match self {
            LearnerSpec::ZeroR => LearnerId::ZeroR,
            LearnerSpec::OneR { .. } => LearnerId::OneR,
            LearnerSpec::DecisionStump => LearnerId::DecisionStump,
            LearnerSpec::Knn { .. } => LearnerId::Knn,
            LearnerSpec::NaiveBayes { .. } => LearnerId::NaiveBayes,
            LearnerSpec::LogisticSgd { .. } => LearnerId::LogisticSgd,
            LearnerSpec::CartTree { .. } => LearnerId::CartTree,
            LearnerSpec::RandomForest { .. } => LearnerId::RandomForest,
            LearnerSpec::AdaboostM1 { .. } => LearnerId::AdaboostM1,
            LearnerSpec::Bagging { .. } => LearnerId::Bagging,
            LearnerSpec::Voting { .. } => LearnerId::Voting,
        }
    }
}

/// A learner plus optional feature-selection preprocessing.
#[derive(Debug, Clone, PartialEq)]
pub struct Pipeline {
    pub feat_sel: Option<FeatSelConfig>,
    pub learner: LearnerSpec,
}

/// Weighted view of dataset rows; indices may repeat (bootstrap samples).
#[derive(Debug, Clone)]
pub(crate) struct Samples<'a> {
    pub data: &'a Dataset,
    pub idx: Vec<usize>,
    pub w: Vec<f64>,
}

impl<'a> Samples<'a> {
    pub fn all(data: &'a Dataset) -> Self {
        Self {
            data,
            idx: (0..data.len()).collect(),
            w: vec![1.0; data.len()],
        }
    }

    pub fn len(&self) -> usize {
        self.idx.len()
    }

    pub fn row(&self, s: usize) -> &'a [f64] {
        self.data.row(self.idx[s])
    }

    pub fn label(&self, s: usize) -> usize {
        self.data.labels()[self.idx[s]]
    }

    pub fn n_classes(&self) -> usize {
        self.data.n_classes()
    }

    pub fn class_weights(&self) -> Vec<f64> {
        let mut dist = vec![0.0; self.n_classes()];
        for s in 0..self.len() {
            dist[self.label(s)] += self.w[s];
        }
        dist
    }
}

/// Index of the largest score; ties go to the lowest index.
pub(crate) fn argmax(scores: &[f64]) -> usize {
    let mut best = 0;
    for (i, &s) in scores.iter().enumerate().skip(1) {
        if s > scores[best] {
            best = i;
        }
    }
    best
}

pub(crate) fn normalize(mut v: Vec<f64>) -> Vec<f64> {
    let s: f64 = v.iter().sum();
    if s > 0.0 {
        v.iter_mut().for_each(|x| *x /= s);
    } else if !v.is_empty() {
        let u = 1.0 / v.len() as f64;
        v.iter_mut().for_each(|x| *x = u);
    }
    v
}

/// Child seed derived from a parent seed and a stream tag (splitmix64).
pub fn derive_seed(seed: u64, tag: u64) -> u64 {
    let mut z = seed ^ tag.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn rng_for(seed: u64, tag: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(seed, tag))
}

#[derive(Debug, Clone)]
pub(crate) enum Model {
    Constant(Vec<f64>),
    OneR(models::OneRule),
    Tree(tree::Tree),
    Knn(models::Knn),
    NaiveBayes(models::NaiveBayes),
    Logistic(models::Logistic),
    Forest(Vec<tree::Tree>),
    Boosted(Vec<(Model, f64)>),
    Bagged(Vec<Model>),
    Vote(Vec<Model>),
}

impl Model {
    /// Class distribution for one row.
    pub fn distribution(&self, row: &[f64], n_classes: usize) -> Vec<f64> {
        match self {
            Model::Constant(d) => d.clone(),
            Model::OneR(m) => m.distribution(row, n_classes),
            Model::Tree(t) => t.distribution(row).to_vec(),
            Model::Knn(m) => m.distribution(row, n_classes),
            Model::NaiveBayes(m) => m.distribution(row),
            Model::Logistic(m) => m.distribution(row),
            Model::Forest(trees) => {
                let mut acc = vec![0.0; n_classes];
                for t in trees {
                    for (a, p) in acc.iter_mut().zip(t.distribution(row)) {
                        *a += p;
                    }
                }
                normalize(acc)
            }
            Model::Boosted(members) => {
                let mut acc = vec![0.0; n_classes];
                for (m, alpha) in members {
                    acc[m.predict_row(row, n_classes)] += alpha;
                }
                normalize(acc)
            }
            Model::Bagged(members) => {
                let mut acc = vec![0.0; n_classes];
                for m in members {
                    for (a, p) in acc.iter_mut().zip(m.distribution(row, n_classes)) {
                        *a += p;
                    }
                }
                normalize(acc)
            }
            Model::Vote(members) => {
                let mut acc = vec![0.0; n_classes];
                for m in members {
                    acc[m.predict_row(row, n_classes)] += 1.0;
                }
                normalize(acc)
            }
        }
    }

    pub fn predict_row(&self, row: &[f64], n_classes: usize) -> usize {
        argmax(&self.distribution(row, n_classes))
    }
}

pub(crate) fn fit(
    spec: &LearnerSpec,
    samples: &Samples<'_>,
    budget: &mut Budget,
    seed: u64,
) -> Result<Model, LearnError> {
    budget.charge(samples.len() as u64)?;
    let present = samples.class_weights().iter().filter(|&&w| w > 0.0).count();
    if present <= 1 {
        return Ok(Model::Constant(models::zero_r(samples)));
    }
    Ok(match spec {
        LearnerSpec::ZeroR => Model::Constant(models::zero_r(samples)),
        LearnerSpec::OneR { min_bucket } => Model::OneR(models::OneRule::fit(samples, *min_bucket, budget)?),
        LearnerSpec::DecisionStump => Model::Tree(tree::Tree::fit(
            samples,
            &tree::TreeParams { max_depth: 1, min_leaf: 1, criterion: SplitCriterion::Entropy, max_features: None },
            budget,
            &mut rng_for(seed, 0),
        )?),
        LearnerSpec::Knn { k, weighting } => Model::Knn(models::Knn::fit(samples, *k, *weighting)),
        LearnerSpec::NaiveBayes { discretize } => {
            Model::NaiveBayes(models::NaiveBayes::fit(samples, *discretize, budget)?)
        }
        LearnerSpec::LogisticSgd { learning_rate, epochs, l2 } => Model::Logistic(models::Logistic::fit(
            samples,
            *learning_rate,
            *epochs,
            *l2,
            budget,
            &mut rng_for(seed, 1),
        )?),
        LearnerSpec::CartTree { max_depth, min_leaf, criterion } => Model::Tree(tree::Tree::fit(
            samples,
            &tree::TreeParams { max_depth: *max_depth, min_leaf: *min_leaf, criterion: *criterion, max_features: None },
            budget,
            &mut rng_for(seed, 2),
        )?),
        LearnerSpec::RandomForest { trees, feature_fraction, max_depth } => {
            Model::Forest(tree::fit_forest(samples, *trees, *feature_fraction, *max_depth, budget, seed)?)
        }
        LearnerSpec::AdaboostM1 { iterations, base } => {
            Model::Boosted(meta::adaboost_m1(samples, *iterations, base, budget, seed)?.members)
        }
        LearnerSpec::Bagging { iterations, bag_fraction, base } => {
            Model::Bagged(meta::bagging(samples, *iterations, *bag_fraction, base, budget, seed)?)
        }
        LearnerSpec::Voting { bases } => Model::Vote(meta::voting(samples, bases, budget, seed)?),
    })
}

/// A fitted pipeline ready to classify rows of the training arity.
#[derive(Debug, Clone)]
pub struct TrainedModel {
    learner: LearnerId,
    model: Model,
    selector: Option<FeatureSelector>,
    n_classes: usize,
    arity: usize,
    class_counts: Vec<usize>,
}

impl TrainedModel {
    pub fn learner(&self) -> LearnerId {
        self.learner
    }

    pub fn selector(&self) -> Option<&FeatureSelector> {
        self.selector.as_ref()
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn arity(&self) -> usize {
        self.arity
    }

    /// Per-class instance counts seen during training.
    pub fn class_counts(&self) -> &[usize] {
        &self.class_counts
    }

    /// Debug rendering of the fitted state, stable across identical fits.
    pub fn state_fingerprint(&self) -> String {
        format!("{:?}|{:?}", self.model, self.selector)
    }

    pub fn predict(&self, rows: &[Vec<f64>]) -> Result<Vec<usize>, LearnError> {
        rows.iter().map(|r| self.predict_one(r)).collect()
    }

    pub fn predict_one(&self, row: &[f64]) -> Result<usize, LearnError> {
        if row.len() != self.arity {
            return Err(LearnError::ArityMismatch { expected: self.arity, got: row.len() });
        }
        Ok(match &self.selector {
            Some(sel) => {
                let projected: Vec<f64> = sel.attributes().iter().map(|&a| row[a]).collect();
                self.model.predict_row(&projected, self.n_classes)
            }
            None => self.model.predict_row(row, self.n_classes),
        })
    }
}

/// Trains a decoded pipeline on `data`.
pub fn train_pipeline(
    pipeline: &Pipeline,
    data: &Dataset,
    budget: &mut Budget,
    seed: u64,
) -> Result<TrainedModel, LearnError> {
    if data.is_empty() {
        return Err(LearnError::InvalidConfig("empty training data".into()));
    }
    budget.charge(data.len() as u64)?;
    let selector = match &pipeline.feat_sel {
        Some(cfg) => Some(select_features(cfg, data, budget)?),
        None => None,
    };
    let projected;
    let train_data = match &selector {
        Some(sel) => {
            projected = data.project(sel.attributes());
            &projected
        }
        None => data,
    };
    let model = fit(&pipeline.learner, &Samples::all(train_data), budget, seed)?;
    Ok(TrainedModel {
        learner: pipeline.learner.id(),
        model,
        selector,
        n_classes: data.n_classes(),
        arity: data.n_attributes(),
        class_counts: data.class_counts(),
    })
}

/// Trains the pipeline described by a config of `space` (normally
/// [`space_of_learners`]).
pub fn train(
    space: &ParamSpace,
    config: &Config,
    data: &Dataset,
    budget: &mut Budget,
    seed: u64,
) -> Result<TrainedModel, LearnError> {
    let pipeline = decode(space, config)?;
    train_pipeline(&pipeline, data, budget, seed)
}

pub fn predict(model: &TrainedModel, rows: &[Vec<f64>]) -> Result<Vec<usize>, LearnError> {
    model.predict(rows)
}

/// Fraction of instances whose prediction differs from the label.
pub fn misclassification_rate(model: &TrainedModel, data: &Dataset) -> Result<f64, LearnError> {
    if data.is_empty() {
        return Ok(0.0);
    }
    let predictions = model.predict(data.rows())?;
    let wrong = predictions
        .iter()
        .zip(data.labels())
        .filter(|(p, l)| p != l)
        .count();
    Ok(wrong as f64 / data.len() as f64)
}
