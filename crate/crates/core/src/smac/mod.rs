//! SMAC-style optimizer: random-forest surrogate, closed-form expected
//! improvement maximized by local search, every other proposal drawn at
//! random, and fold-by-fold racing against the incumbent.

mod forest;

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::evaluator::{mean_cv_loss, RunHistory};
use crate::paramspace::{Config, FeatureVector, ParamSpace};
use crate::smbo::{EvalContext, OptimizerStrategy};

pub use forest::{ForestParams, Posterior, RegressionForest};

/// Settings of the EI maximization.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SearchParams {
    pub random_samples: usize,
    pub starts: usize,
    pub max_steps: usize,
}

impl Default for SearchParams {
    fn default() -> Self {
        Self { random_samples: 1000, starts: 10, max_steps: 20 }
    }
}

pub fn std_normal_pdf(u: f64) -> f64 {
    (-0.5 * u * u).exp() / (2.0 * PI).sqrt()
}

pub fn std_normal_cdf(u: f64) -> f64 {
    0.5 * erfc(-u * FRAC_1_SQRT_2)
}

/// E[max(c_min - c, 0)] for c ~ N(mu, sigma^2).
pub fn expected_improvement(mu: f64, sigma: f64, c_min: f64) -> f64 {
    if sigma <= 0.0 {
        return (c_min - mu).max(0.0);
    }
    let u = (c_min - mu) / sigma;
    (sigma * (u * std_normal_cdf(u) + std_normal_pdf(u))).max(0.0)
}

/// Anything that yields a predictive distribution for an encoded config.
pub trait Surrogate {
    fn posterior(&self, x: &FeatureVector) -> Posterior;
}

impl Surrogate for RegressionForest {
    fn posterior(&self, x: &FeatureVector) -> Posterior {
        self.predict(x)
    }
}

/// EI of one hill-climb, at its start and where it stopped.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SearchPath {
    pub start_ei: f64,
    pub end_ei: f64,
    pub steps: usize,
}

fn ei_of(space: &ParamSpace, s: &dyn Surrogate, c_min: f64, config: &Config) -> f64 {
    let p = s.posterior(&space.impute_defaults(config));
    expected_improvement(p.mu, p.sigma2.max(0.0).sqrt(), c_min)
}

/// Local-search EI maximization: rank `seeds` plus random prior samples by
/// EI, hill-climb from the best `starts` through neighbourhoods, and return
/// the highest-EI config that `is_new` accepts.
pub fn maximize_ei(
    space: &ParamSpace,
    surrogate: &dyn Surrogate,
    c_min: f64,
    seeds: &[Config],
    is_new: &dyn Fn(&Config) -> bool,
    params: &SearchParams,
    rng: &mut ChaCha8Rng,
) -> (Option<Config>, Vec<SearchPath>) {
    let mut pool: Vec<(f64, Config)> = seeds.iter().map(|c| (ei_of(space, surrogate, c_min, c), c.clone())).collect();
    for _ in 0..params.random_samples {
        let c = space.sample_random(rng);
        pool.push((ei_of(space, surrogate, c_min, &c), c));
    }
    let mut order: Vec<usize> = (0..pool.len()).collect();
    order.sort_by(|&a, &b| pool[b].0.total_cmp(&pool[a].0).then(a.cmp(&b)));

    let mut best: Option<(f64, Config)> = None;
    let mut consider = |ei: f64, c: &Config| {
        if is_new(c) && best.as_ref().is_none_or(|(b, _)| ei > *b) {
            best = Some((ei, c.clone()));
        }
    };
    for (ei, c) in &pool {
        consider(*ei, c);
    }

    let mut paths = Vec::new();
    for &start in order.iter().take(params.starts) {
        let (start_ei, mut current) = (pool[start].0, pool[start].1.clone());
        let mut current_ei = start_ei;
        let mut steps = 0;
        while steps < params.max_steps {
            let step_best = space
                .neighbors(&current, rng)
                .into_iter()
                .map(|n| (ei_of(space, surrogate, c_min, &n), n))
                .fold(None::<(f64, Config)>, |acc, (e, n)| match acc {
                    Some((b, _)) if b >= e => acc,
                    _ => Some((e, n)),
                });
            match step_best {
                Some((e, n)) if e > current_ei => {
                    consider(e, &n);
                    current = n;
                    current_ei = e;
                    steps += 1;
                }
                _ => break,
            }
        }
        paths.push(SearchPath { start_ei, end_ei: current_ei, steps });
    }
    (best.map(|(_, c)| c), paths)
}

/// The incumbent together with the folds it has been evaluated on, in order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IncumbentState {
    pub config_id: usize,
    pub folds: Vec<usize>,
}

/// One challenger-beats-incumbent event.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Replacement {
    pub evaluations: usize,
    pub old: usize,
    pub new: usize,
    pub folds: Vec<usize>,
    pub old_mean: f64,
    pub new_mean: f64,
}

/// Races `challenger` against the incumbent on the incumbent's folds, in
/// order, then gives the surviving incumbent one more fold. Returns the
/// replacement event if the challenger won.
pub fn intensify(
    challenger: usize,
    state: &mut Option<IncumbentState>,
    ctx: &mut EvalContext<'_>,
) -> Option<Replacement> {
    let k = ctx.n_folds();
    let Some(inc) = state.as_mut() else {
        let fold = (0..k).find(|&f| ctx.history().lookup(challenger, f).is_some()).unwrap_or(0);
        ctx.loss(challenger, fold)?;
        *state = Some(IncumbentState { config_id: challenger, folds: vec![fold] });
        ctx.record_incumbent(challenger, None);
        return None;
    };

    let mut replacement = None;
    if challenger != inc.config_id {
        let (mut ch_sum, mut inc_sum) = (0.0, 0.0);
        let mut survived = true;
        for (j, &f) in inc.folds.iter().enumerate() {
            let Some(l) = ctx.loss(challenger, f) else {
                survived = false;
                break;
            };
            ch_sum += l;
            inc_sum += ctx.history().lookup(inc.config_id, f).expect("incumbent fold is recorded").loss;
            let n = (j + 1) as f64;
            if ch_sum / n > inc_sum / n {
                survived = false;
                break;
            }
        }
        if survived {
            let h = ctx.history();
            let ch_mean = mean_cv_loss(h, challenger, &inc.folds).expect("challenger raced on every fold");
            let inc_mean = mean_cv_loss(h, inc.config_id, &inc.folds).expect("incumbent fold is recorded");
            if ch_mean < inc_mean {
                replacement = Some(Replacement {
                    evaluations: h.n_evaluations(),
                    old: inc.config_id,
                    new: challenger,
                    folds: inc.folds.clone(),
                    old_mean: inc_mean,
                    new_mean: ch_mean,
                });
                inc.config_id = challenger;
                ctx.record_incumbent(challenger, Some(inc_mean));
            }
        }
    }

    if let Some(f) = (0..k).find(|f| !inc.folds.contains(f)) {
        if ctx.loss(inc.config_id, f).is_some() {
            inc.folds.push(f);
        }
    }
    replacement
}

/// The SMAC strategy.
#[derive(Debug, Clone)]
pub struct Smac {
    pub forest: ForestParams,
    pub search: SearchParams,
    rng: ChaCha8Rng,
    step: usize,
    state: Option<IncumbentState>,
    replacements: Vec<Replacement>,
    paths: Vec<SearchPath>,
}

impl Default for Smac {
    fn default() -> Self {
        Self::new(ForestParams::default(), SearchParams::default())
    }
}

impl Smac {
    pub fn new(forest: ForestParams, search: SearchParams) -> Self {
        Self {
            forest,
            search,
            rng: ChaCha8Rng::seed_from_u64(0),
            step: 0,
            state: None,
            replacements: Vec::new(),
            paths: Vec::new(),
        }
    }

    pub fn replacements(&self) -> &[Replacement] {
        &self.replacements
    }

    pub fn incumbent_state(&self) -> Option<&IncumbentState> {
        self.state.as_ref()
    }

    /// Hill-climb paths of every model-based proposal so far.
    pub fn search_paths(&self) -> &[SearchPath] {
        &self.paths
    }

    fn model_proposal(&mut self, space: &ParamSpace, history: &RunHistory) -> Option<Config> {
        let inc = self.state.as_ref()?;
        let c_min = mean_cv_loss(history, inc.config_id, &inc.folds).ok()?;
        let forest = RegressionForest::fit_history(history, space, &self.forest, &mut self.rng)?;
        let evaluated: Vec<Config> = (0..history.configs().len())
            .filter(|&id| !history.folds_of(id).is_empty())
            .map(|id| history.config(id).clone())
            .collect();
        let is_new = |c: &Config| history.id_of(c).is_none_or(|id| history.folds_of(id).is_empty());
        let (best, paths) = maximize_ei(space, &forest, c_min, &evaluated, &is_new, &self.search, &mut self.rng);
        self.paths.extend(paths);
        best
    }
}

impl OptimizerStrategy for Smac {
    fn name(&self) -> &'static str {
        "smac"
    }

    fn initialize(&mut self, _space: &ParamSpace, _n_folds: usize, seed: u64) {
        *self = Self::new(self.forest, self.search);
        self.rng = ChaCha8Rng::seed_from_u64(seed);
    }

    fn propose(&mut self, space: &ParamSpace, history: &RunHistory) -> Config {
        self.step += 1;
        if self.step.is_multiple_of(2) {
            if let Some(c) = self.model_proposal(space, history) {
                return c;
            }
        }
        space.sample_random(&mut self.rng)
    }

    fn observe(&mut self, _space: &ParamSpace, config_id: usize, ctx: &mut EvalContext<'_>) {
        if let Some(r) = intensify(config_id, &mut self.state, ctx) {
            self.replacements.push(r);
        }
    }

    fn incumbent(&self) -> Option<usize> {
        self.state.as_ref().map(|s| s.config_id)
    }
}
