//! Comparison methods without a model: Ex-Def (every roster learner at its
//! defaults, fully cross-validated) and Random Grid (random search over the
//! union of per-learner hyperparameter grids).

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::evaluator::{Objective, RunHistory};
use crate::learners::ex_def_roster;
use crate::paramspace::{Config, Domain, ParamSpace, ParamSpec, Prior, Value};
use crate::smbo::{EvalContext, FullCvIncumbent, OptimizerStrategy, RunResult};

/// Maximum grid values per numeric hyperparameter.
pub const GRID_POINTS: usize = 10;

/// The learner-space roster with printable names.
pub fn learner_roster(space: &ParamSpace) -> Vec<(String, Config)> {
    ex_def_roster(space).into_iter().map(|(id, c)| (id.name().to_string(), c)).collect()
}

/// Ex-Def outcome: the run (all roster configs on all folds) and each
/// roster entry's mean CV loss in roster order.
#[derive(Debug, Clone, PartialEq)]
pub struct ExDef {
    pub result: RunResult,
    pub table: Vec<(String, f64)>,
    /// Roster position of the winner.
    pub best: usize,
}

impl ExDef {
    pub fn best_name(&self) -> &str {
        &self.table[self.best].0
    }
}

/// Cross-validates every roster entry on every fold and keeps the lowest
/// mean; earlier entries win ties.
pub fn ex_def(roster: &[(String, Config)], objective: &dyn Objective, seed: u64) -> ExDef {
    assert!(!roster.is_empty(), "ex_def needs a nonempty roster");
    let mut history = RunHistory::new();
    let mut tracker = FullCvIncumbent::default();
    let mut table = Vec::with_capacity(roster.len());
    let mut ids = Vec::with_capacity(roster.len());
    for (name, config) in roster {
        let id = history.register(config.clone());
        let mut ctx = EvalContext::new(objective, &mut history, usize::MAX, None);
        let mean = tracker.offer(&mut ctx, id).expect("unbounded budget");
        table.push((name.clone(), mean));
        ids.push(id);
    }
    let incumbent = tracker.incumbent().expect("nonempty roster");
    let final_fold_losses = (0..objective.n_folds())
        .map(|f| history.lookup(incumbent, f).expect("fully evaluated").loss)
        .collect();
    let result = RunResult {
        method: "ex_def".into(),
        seed,
        incumbent,
        incumbent_loss: tracker.best_loss().expect("nonempty roster"),
        final_fold_losses,
        history,
    };
    let best = ids.iter().position(|&id| id == incumbent).expect("incumbent is a roster entry");
    ExDef { result, table, best }
}

/// At most `max` grid values of a parameter: every level of a categorical,
/// evenly spaced (log-spaced under a log prior) numeric values with integers
/// rounded and deduplicated.
pub fn grid_values(p: &ParamSpec, max: usize) -> Vec<Value> {
    let max = max.max(1);
    let spaced = |lo: f64, hi: f64| -> Vec<f64> {
        if max == 1 {
            return vec![(lo + hi) / 2.0];
        }
        (0..max).map(|i| lo + (hi - lo) * i as f64 / (max - 1) as f64).collect()
    };
    let (lo, hi) = match &p.domain {
        Domain::Categorical(levels) => return (0..levels.len()).map(Value::Level).collect(),
        Domain::Integer { lo, hi } => (*lo as f64, *hi as f64),
        Domain::Real { lo, hi } => (*lo, *hi),
    };
    let xs: Vec<f64> = match p.prior {
        Prior::Uniform => spaced(lo, hi),
        Prior::LogUniform => spaced(lo.ln(), hi.ln()).into_iter().map(f64::exp).collect(),
    };
    match p.domain {
        Domain::Integer { lo, hi } => {
            let mut v: Vec<i64> = xs.iter().map(|x| (x.round() as i64).clamp(lo, hi)).collect();
            v.dedup();
            v.into_iter().map(Value::Int).collect()
        }
        _ => xs.into_iter().map(|x| Value::Real(x.clamp(lo, hi))).collect(),
    }
}

/// Grid of one anchor config: the anchor with its tunable parameters varied
/// over their grid values.
#[derive(Debug, Clone, PartialEq)]
pub struct LearnerGrid {
    pub name: String,
    pub anchor: Config,
    pub axes: Vec<(usize, Vec<Value>)>,
}

impl LearnerGrid {
    pub fn size(&self) -> u64 {
        self.axes.iter().map(|(_, v)| v.len() as u64).product()
    }

    /// Grid point by mixed-radix index, last axis fastest.
    pub fn point(&self, mut index: u64) -> Config {
        let mut c = self.anchor.clone();
        for (param, values) in self.axes.iter().rev() {
            let n = values.len() as u64;
            c.set(*param, Some(values[(index % n) as usize]));
            index /= n;
        }
        c
    }
}

/// Union of per-learner grids.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    pub grids: Vec<LearnerGrid>,
}

impl GridSpec {
    /// One grid per anchor over the anchor's active parameters accepted by
    /// `tunable`. Tunable parameters must not control other parameters.
    pub fn from_anchors(
        space: &ParamSpace,
        anchors: &[(String, Config)],
        tunable: impl Fn(&ParamSpec) -> bool,
    ) -> Self {
        let grids = anchors
            .iter()
            .map(|(name, anchor)| {
                let active = space.active_mask(anchor);
                let axes = space
                    .params()
                    .iter()
                    .enumerate()
                    .filter(|&(i, p)| active[i] && tunable(p))
                    .map(|(i, p)| (i, grid_values(p, GRID_POINTS)))
                    .collect();
                LearnerGrid { name: name.clone(), anchor: anchor.clone(), axes }
            })
            .collect();
        Self { grids }
    }

    /// Grids over the single base learners of the learner space.
    pub fn for_learners(space: &ParamSpace) -> Self {
        let anchors: Vec<(String, Config)> = learner_roster(space)
            .into_iter()
            .filter(|(_, c)| space.level_name(c, "is_base") == Some("true"))
            .collect();
        Self::from_anchors(space, &anchors, |p| p.name.starts_with("base."))
    }

    pub fn size(&self) -> u64 {
        self.grids.iter().map(LearnerGrid::size).sum()
    }

    /// Point of the union by global index, grids in order.
    pub fn point(&self, mut index: u64) -> Config {
        for g in &self.grids {
            if index < g.size() {
                return g.point(index);
            }
            index -= g.size();
        }
        panic!("grid index out of range");
    }

    /// Uniform draw from the union (so a learner is chosen in proportion to
    /// its grid size).
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Config {
        self.point(rng.random_range(0..self.size()))
    }

    pub fn iter(&self) -> impl Iterator<Item = Config> + '_ {
        (0..self.size()).map(|i| self.point(i))
    }
}

/// Random search over a grid union, preceded by the default configs; every
/// candidate is evaluated on all folds.
#[derive(Debug, Clone)]
pub struct RandomGrid {
    grid: GridSpec,
    defaults: Vec<Config>,
    rng: ChaCha8Rng,
    step: usize,
    tracker: FullCvIncumbent,
}

impl RandomGrid {
    pub fn new(grid: GridSpec, defaults: Vec<Config>) -> Self {
        assert!(grid.size() > 0 || !defaults.is_empty(), "random grid needs candidates");
        Self { grid, defaults, rng: ChaCha8Rng::seed_from_u64(0), step: 0, tracker: FullCvIncumbent::default() }
    }

    /// Learner-space grids seeded with the Ex-Def roster.
    pub fn for_learners(space: &ParamSpace) -> Self {
        Self::new(GridSpec::for_learners(space), learner_roster(space).into_iter().map(|(_, c)| c).collect())
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }
}

impl OptimizerStrategy for RandomGrid {
    fn name(&self) -> &'static str {
        "random_grid"
    }

    fn initialize(&mut self, _space: &ParamSpace, _n_folds: usize, seed: u64) {
        self.rng = ChaCha8Rng::seed_from_u64(seed);
        self.step = 0;
        self.tracker = FullCvIncumbent::default();
    }

    fn propose(&mut self, _space: &ParamSpace, _history: &RunHistory) -> Config {
        self.step += 1;
        match self.defaults.get(self.step - 1) {
            Some(c) => c.clone(),
            None if self.grid.size() == 0 => self.defaults[(self.step - 1) % self.defaults.len()].clone(),
            None => self.grid.sample(&mut self.rng),
        }
    }

    fn observe(&mut self, _space: &ParamSpace, config_id: usize, ctx: &mut EvalContext<'_>) {
        self.tracker.offer(ctx, config_id);
    }

    fn incumbent(&self) -> Option<usize> {
        self.tracker.incumbent()
    }
}

#[cfg(test)]
mod tests;
