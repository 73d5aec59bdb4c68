//! The generic SMBO loop, run results, and the run-level statistics shared by
//! every optimizer (best-of-runs selection, Spearman rank correlation and the
//! trajectory overfitting signal).

use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value as Json};
use thiserror::Error;

use crate::evaluator::{mean_cv_loss, EvalError, FoldLossRecord, Objective, RunHistory, TrajectoryPoint};
use crate::paramspace::{Config, ParamSpace};

/// Rounds in a row without a new fold evaluation after which a run stops.
pub const STALL_ROUNDS: usize = 1000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SmboError {
    #[error("budget {budget} is smaller than the fold count {k}")]
    BudgetBelowFolds { budget: usize, k: usize },
    #[error("no runs given")]
    EmptyInput,
    #[error("sequences have lengths {0} and {1}")]
    LengthMismatch(usize, usize),
    #[error("need at least two values, got {0}")]
    TooShort(usize),
    #[error("rank correlation undefined for a constant sequence")]
    DegenerateConstantSequence,
    #[error("malformed run result: {0}")]
    Malformed(String),
    #[error(transparent)]
    History(#[from] EvalError),
}

/// Fold-evaluation access handed to a strategy for one round.
pub struct EvalContext<'a> {
    objective: &'a dyn Objective,
    history: &'a mut RunHistory,
    budget: usize,
    deadline: Option<Instant>,
}

impl<'a> EvalContext<'a> {
    pub fn new(
        objective: &'a dyn Objective,
        history: &'a mut RunHistory,
        budget: usize,
        deadline: Option<Instant>,
    ) -> Self {
        Self { objective, history, budget, deadline }
    }

    pub fn n_folds(&self) -> usize {
        self.objective.n_folds()
    }

    pub fn history(&self) -> &RunHistory {
        self.history
    }

    /// Fold evaluations still available; zero once the deadline has passed.
    pub fn remaining(&self) -> usize {
        if self.deadline.is_some_and(|d| Instant::now() >= d) {
            return 0;
        }
        self.budget.saturating_sub(self.history.n_evaluations())
    }

    /// Loss of a registered config on a fold, evaluating it if it is not
    /// cached. `None` when a new evaluation is needed but none are left.
    pub fn loss(&mut self, config_id: usize, fold: usize) -> Option<f64> {
        if let Some(r) = self.history.lookup(config_id, fold) {
            return Some(r.loss);
        }
        if self.remaining() == 0 {
            return None;
        }
        let out = self.objective.evaluate(self.history.config(config_id), fold);
        let rec = FoldLossRecord {
            config_id,
            fold,
            loss: out.loss.clamp(0.0, 1.0),
            budget_exhausted: out.budget_exhausted,
            wall_time_ms: out.wall_time_ms,
        };
        let loss = rec.loss;
        self.history.record(rec).expect("fresh (config, fold) pair");
        Some(loss)
    }

    /// Mean loss over all folds, evaluating missing ones. Nothing is
    /// evaluated unless the remaining budget covers every missing fold.
    pub fn full_cv(&mut self, config_id: usize) -> Option<f64> {
        let k = self.n_folds();
        let missing = (0..k).filter(|&f| self.history.lookup(config_id, f).is_none()).count();
        if missing > self.remaining() {
            return None;
        }
        let mut sum = 0.0;
        for f in 0..k {
            sum += self.loss(config_id, f)?;
        }
        Some(sum / k as f64)
    }

    /// Records an incumbent change at the current evaluation count.
    pub fn record_incumbent(&mut self, config_id: usize, replaced_mean: Option<f64>) {
        let folds = self.history.folds_of(config_id).to_vec();
        let mean_loss = mean_cv_loss(self.history, config_id, &folds).unwrap_or(1.0);
        let evaluations = self.history.n_evaluations();
        self.history.push_trajectory(TrajectoryPoint { evaluations, config_id, mean_loss, folds, replaced_mean });
    }
}

/// A model-based (or model-free) proposal strategy plugged into [`run_smbo`].
pub trait OptimizerStrategy {
    fn name(&self) -> &'static str;

    fn initialize(&mut self, space: &ParamSpace, n_folds: usize, seed: u64);

    /// Next configuration to try; always valid in `space`.
    fn propose(&mut self, space: &ParamSpace, history: &RunHistory) -> Config;

    /// Evaluates the registered proposal on as many folds as the strategy
    /// wants and updates the incumbent.
    fn observe(&mut self, space: &ParamSpace, config_id: usize, ctx: &mut EvalContext<'_>);

    fn incumbent(&self) -> Option<usize>;
}

/// Outcome of one optimizer run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunResult {
    pub method: String,
    pub seed: u64,
    pub incumbent: usize,
    /// Mean loss of the incumbent over the folds evaluated during the run.
    pub incumbent_loss: f64,
    /// Incumbent losses on every fold; folds the run never evaluated are
    /// computed after the budget ran out.
    pub final_fold_losses: Vec<f64>,
    pub history: RunHistory,
}

impl RunResult {
    pub fn incumbent_config(&self) -> &Config {
        self.history.config(self.incumbent)
    }

    /// Mean CV loss of the incumbent over all folds.
    pub fn final_cv_loss(&self) -> f64 {
        self.final_fold_losses.iter().sum::<f64>() / self.final_fold_losses.len().max(1) as f64
    }

    pub fn evaluations(&self) -> usize {
        self.history.n_evaluations()
    }

    pub fn to_json(&self, space: &ParamSpace) -> Json {
        json!({
            "method": self.method,
            "seed": self.seed,
            "evaluations": self.evaluations(),
            "incumbent": {
                "id": self.incumbent,
                "config": space.config_to_json(self.incumbent_config()),
                "description": space.describe(self.incumbent_config()),
                "mean_loss": self.incumbent_loss,
                "folds": self.history.folds_of(self.incumbent),
            },
            "final_fold_losses": self.final_fold_losses,
            "final_cv_loss": self.final_cv_loss(),
            "history": self.history.to_entries(space),
        })
    }

    pub fn from_json(space: &ParamSpace, v: &Json) -> Result<Self, SmboError> {
        let bad = |what: &str| SmboError::Malformed(format!("missing or invalid `{what}`"));
        let entries = v.get("history").and_then(Json::as_array).ok_or_else(|| bad("history"))?;
        let history = RunHistory::from_entries(space, entries)?;
        let inc = v.get("incumbent").ok_or_else(|| bad("incumbent"))?;
        let incumbent = inc.get("id").and_then(Json::as_u64).ok_or_else(|| bad("incumbent.id"))? as usize;
        if incumbent >= history.configs().len() {
            return Err(bad("incumbent.id"));
        }
        Ok(Self {
            method: v.get("method").and_then(Json::as_str).ok_or_else(|| bad("method"))?.to_string(),
            seed: v.get("seed").and_then(Json::as_u64).ok_or_else(|| bad("seed"))?,
            incumbent,
            incumbent_loss: inc.get("mean_loss").and_then(Json::as_f64).ok_or_else(|| bad("incumbent.mean_loss"))?,
            final_fold_losses: v
                .get("final_fold_losses")
                .and_then(Json::as_array)
                .ok_or_else(|| bad("final_fold_losses"))?
                .iter()
                .map(|x| x.as_f64().ok_or_else(|| bad("final_fold_losses")))
                .collect::<Result<_, _>>()?,
            history,
        })
    }
}

/// Alg. 1 style loop: propose, let the strategy evaluate, repeat until the
/// fold-evaluation budget (or the optional wall-clock deadline) is spent.
pub fn run_smbo(
    strategy: &mut dyn OptimizerStrategy,
    space: &ParamSpace,
    objective: &dyn Objective,
    budget: usize,
    seed: u64,
    deadline: Option<Instant>,
) -> Result<RunResult, SmboError> {
    let k = objective.n_folds();
    if budget < k {
        return Err(SmboError::BudgetBelowFolds { budget, k });
    }
    strategy.initialize(space, k, seed);
    let mut history = RunHistory::new();
    let mut stalled = 0;
    loop {
        let mut ctx = EvalContext::new(objective, &mut history, budget, deadline);
        if ctx.remaining() == 0 || stalled >= STALL_ROUNDS {
            break;
        }
        let before = ctx.history().n_evaluations();
        let config = strategy.propose(space, ctx.history());
        let id = ctx.history.register(config);
        strategy.observe(space, id, &mut ctx);
        stalled = if ctx.history().n_evaluations() == before { stalled + 1 } else { 0 };
    }

    let incumbent = strategy
        .incumbent()
        .or_else(|| best_mean_config(&history))
        .unwrap_or_else(|| history.register(space.default_config()));
    let incumbent_loss = history.mean_loss(incumbent).unwrap_or(1.0);
    let final_fold_losses = (0..k)
        .map(|f| match history.lookup(incumbent, f) {
            Some(r) => r.loss,
            None => objective.evaluate(history.config(incumbent), f).loss.clamp(0.0, 1.0),
        })
        .collect();
    Ok(RunResult {
        method: strategy.name().to_string(),
        seed,
        incumbent,
        incumbent_loss,
        final_fold_losses,
        history,
    })
}

fn best_mean_config(history: &RunHistory) -> Option<usize> {
    (0..history.configs().len())
        .filter_map(|id| history.mean_loss(id).map(|m| (m, id)))
        .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)))
        .map(|(_, id)| id)
}

/// Incumbent tracking for strategies that evaluate every config on all folds.
#[derive(Debug, Clone, Default)]
pub struct FullCvIncumbent {
    best: Option<(usize, f64)>,
}

impl FullCvIncumbent {
    /// Fully evaluates the config (if budget allows) and makes it incumbent
    /// when its mean is strictly lower. Returns the config's mean.
    pub fn offer(&mut self, ctx: &mut EvalContext<'_>, config_id: usize) -> Option<f64> {
        let mean = ctx.full_cv(config_id)?;
        if self.best.is_none_or(|(_, b)| mean < b) {
            let replaced = self.best.map(|(_, b)| b);
            self.best = Some((config_id, mean));
            ctx.record_incumbent(config_id, replaced);
        }
        Some(mean)
    }

    pub fn incumbent(&self) -> Option<usize> {
        self.best.map(|(id, _)| id)
    }

    pub fn best_loss(&self) -> Option<f64> {
        self.best.map(|(_, l)| l)
    }
}

/// Pure random search: prior samples, each evaluated on all folds.
#[derive(Debug, Clone)]
pub struct RandomSearch {
    rng: ChaCha8Rng,
    tracker: FullCvIncumbent,
}

impl Default for RandomSearch {
    fn default() -> Self {
        Self { rng: ChaCha8Rng::seed_from_u64(0), tracker: FullCvIncumbent::default() }
    }
}

impl OptimizerStrategy for RandomSearch {
    fn name(&self) -> &'static str {
        "random"
    }

    fn initialize(&mut self, _space: &ParamSpace, _n_folds: usize, seed: u64) {
        self.rng = ChaCha8Rng::seed_from_u64(seed);
        self.tracker = FullCvIncumbent::default();
    }

    fn propose(&mut self, space: &ParamSpace, _history: &RunHistory) -> Config {
        space.sample_random(&mut self.rng)
    }

    fn observe(&mut self, _space: &ParamSpace, config_id: usize, ctx: &mut EvalContext<'_>) {
        self.tracker.offer(ctx, config_id);
    }

    fn incumbent(&self) -> Option<usize> {
        self.tracker.incumbent()
    }
}

/// Index of the run with the lowest final CV loss; ties go to the lower seed.
pub fn best_of_runs(results: &[RunResult]) -> Result<usize, SmboError> {
    (0..results.len())
        .min_by(|&a, &b| {
            results[a]
                .final_cv_loss()
                .total_cmp(&results[b].final_cv_loss())
                .then(results[a].seed.cmp(&results[b].seed))
        })
        .ok_or(SmboError::EmptyInput)
}

/// Ranks starting at 1, ties sharing their average rank.
pub fn average_ranks(xs: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..xs.len()).collect();
    order.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
    let mut ranks = vec![0.0; xs.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && xs[order[j + 1]] == xs[order[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &o in &order[i..=j] {
            ranks[o] = avg;
        }
        i = j + 1;
    }
    ranks
}

/// Spearman's rank correlation: Pearson correlation of average ranks.
pub fn spearman_rank(xs: &[f64], ys: &[f64]) -> Result<f64, SmboError> {
    if xs.len() != ys.len() {
        return Err(SmboError::LengthMismatch(xs.len(), ys.len()));
    }
    if xs.len() < 2 {
        return Err(SmboError::TooShort(xs.len()));
    }
    let (rx, ry) = (average_ranks(xs), average_ranks(ys));
    let n = xs.len() as f64;
    let mx = rx.iter().sum::<f64>() / n;
    let my = ry.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in rx.iter().zip(&ry) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(SmboError::DegenerateConstantSequence);
    }
    Ok((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

/// CV and validation losses along an incumbent trajectory and their rank
/// correlation (`None` when undefined).
#[derive(Debug, Clone, PartialEq)]
pub struct OverfitSignal {
    pub config_ids: Vec<usize>,
    pub cv_losses: Vec<f64>,
    pub validation_losses: Vec<f64>,
    pub rho: Option<f64>,
}

/// Scores every trajectory incumbent with `validate` (normally: retrain on
/// the inner training set, measure loss on the held-out validation slice).
pub fn overfit_signal(history: &RunHistory, mut validate: impl FnMut(&Config) -> f64) -> OverfitSignal {
    let traj = history.trajectory();
    let config_ids: Vec<usize> = traj.iter().map(|t| t.config_id).collect();
    let cv_losses: Vec<f64> = traj.iter().map(|t| t.mean_loss).collect();
    let validation_losses: Vec<f64> = config_ids.iter().map(|&id| validate(history.config(id))).collect();
    let rho = spearman_rank(&cv_losses, &validation_losses).ok();
    OverfitSignal { config_ids, cv_losses, validation_losses, rho }
}
