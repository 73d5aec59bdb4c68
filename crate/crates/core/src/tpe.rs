//! TPE-style optimizer: the history is split at a loss quantile into good and
//! bad configurations, each side gets a tree of 1-D Parzen estimators, and the
//! next config is the candidate drawn from the good side that minimizes g/l.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use thiserror::Error;

use crate::evaluator::RunHistory;
use crate::paramspace::{Config, Domain, ParamSpace, ParamSpec, Prior, Value};
use crate::smac::std_normal_cdf;
use crate::smbo::{EvalContext, FullCvIncumbent, OptimizerStrategy};

pub const DEFAULT_GAMMA: f64 = 0.15;
pub const DEFAULT_CANDIDATES: usize = 24;
/// Prior samples evaluated before the densities take over.
pub const DEFAULT_STARTUP: usize = 10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TpeError {
    #[error("need at least 2 observations, got {0}")]
    TooFewObservations(usize),
    #[error("density of the good side must be positive, got {0}")]
    NonpositiveDensity(f64),
    #[error("gamma must lie in (0, 1), got {0}")]
    InvalidGamma(f64),
}

/// Configs split at the loss threshold: `good` below it, `bad` at or above.
#[derive(Debug, Clone, PartialEq)]
pub struct HistorySplit {
    pub good: Vec<usize>,
    pub bad: Vec<usize>,
    pub threshold: f64,
}

/// Position of the threshold in the sorted losses: the smallest index `i`
/// with `i >= gamma * n`, capped at `n - 1`.
pub fn quantile_index(n: usize, gamma: f64) -> usize {
    let i = (gamma * n as f64 - 1e-9).ceil().max(0.0) as usize;
    i.min(n.saturating_sub(1))
}

/// Splits `(id, loss)` pairs. Ids keep their input order on each side.
pub fn split_losses(losses: &[(usize, f64)], gamma: f64) -> Result<HistorySplit, TpeError> {
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(TpeError::InvalidGamma(gamma));
    }
    if losses.len() < 2 {
        return Err(TpeError::TooFewObservations(losses.len()));
    }
    let mut sorted: Vec<f64> = losses.iter().map(|l| l.1).collect();
    sorted.sort_by(f64::total_cmp);
    let threshold = sorted[quantile_index(sorted.len(), gamma)];
    let (good, bad): (Vec<&(usize, f64)>, Vec<_>) = losses.iter().partition(|l| l.1 < threshold);
    Ok(HistorySplit { good: good.iter().map(|l| l.0).collect(), bad: bad.iter().map(|l| l.0).collect(), threshold })
}

/// Splits every config with at least one evaluated fold by its mean loss.
pub fn split_history(history: &RunHistory, gamma: f64) -> Result<HistorySplit, TpeError> {
    let losses: Vec<(usize, f64)> =
        (0..history.configs().len()).filter_map(|id| history.mean_loss(id).map(|m| (id, m))).collect();
    split_losses(&losses, gamma)
}

/// Truncated-Gaussian Parzen estimator on `[lo, hi]`, mixed with equal weight
/// with one uniform pseudo-kernel.
#[derive(Debug, Clone, PartialEq)]
pub struct Parzen {
    lo: f64,
    hi: f64,
    mus: Vec<f64>,
    sigmas: Vec<f64>,
    masses: Vec<f64>,
}

impl Parzen {
    /// Kernels sit at the (sorted) points; each bandwidth is the larger gap
    /// to its neighbours, the domain ends acting as outer neighbours, floored
    /// at `(hi - lo) / min(100, 1 + m)`.
    pub fn new(lo: f64, hi: f64, points: &[f64]) -> Self {
        assert!(hi > lo, "empty domain [{lo}, {hi}]");
        let mut mus: Vec<f64> = points.iter().map(|p| p.clamp(lo, hi)).collect();
        mus.sort_by(f64::total_cmp);
        let m = mus.len();
        let floor = (hi - lo) / (100.0f64).min(1.0 + m as f64);
        let sigmas: Vec<f64> = (0..m)
            .map(|i| {
                let left = mus[i] - if i == 0 { lo } else { mus[i - 1] };
                let right = if i + 1 == m { hi } else { mus[i + 1] } - mus[i];
                left.max(right).max(floor)
            })
            .collect();
        let masses = mus
            .iter()
            .zip(&sigmas)
            .map(|(&mu, &s)| std_normal_cdf((hi - mu) / s) - std_normal_cdf((lo - mu) / s))
            .collect();
        Self { lo, hi, mus, sigmas, masses }
    }

    pub fn bounds(&self) -> (f64, f64) {
        (self.lo, self.hi)
    }

    pub fn centers(&self) -> &[f64] {
        &self.mus
    }

    pub fn bandwidths(&self) -> &[f64] {
        &self.sigmas
    }

    pub fn n_points(&self) -> usize {
        self.mus.len()
    }

    pub fn pdf(&self, x: f64) -> f64 {
        if !(self.lo..=self.hi).contains(&x) {
            return 0.0;
        }
        let mut s = 1.0 / (self.hi - self.lo);
        for ((&mu, &sigma), &z) in self.mus.iter().zip(&self.sigmas).zip(&self.masses) {
            let u = (x - mu) / sigma;
            s += (-0.5 * u * u).exp() / ((2.0 * std::f64::consts::PI).sqrt() * sigma * z);
        }
        s / (self.mus.len() + 1) as f64
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let j = rng.random_range(0..=self.mus.len());
        if j == self.mus.len() {
            return rng.random_range(self.lo..self.hi);
        }
        let normal = Normal::new(self.mus[j], self.sigmas[j]).expect("positive bandwidth");
        loop {
            let x = normal.sample(rng);
            if (self.lo..self.hi).contains(&x) {
                return x;
            }
        }
    }
}

/// Level probabilities from counts with +1 smoothing.
#[derive(Debug, Clone, PartialEq)]
pub struct Categorical {
    pub probs: Vec<f64>,
}

impl Categorical {
    pub fn new(levels: usize, observed: &[usize]) -> Self {
        let mut counts = vec![1.0; levels];
        for &l in observed {
            counts[l] += 1.0;
        }
        let total = (levels + observed.len()) as f64;
        Self { probs: counts.into_iter().map(|c| c / total).collect() }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let mut u = rng.random::<f64>();
        for (i, p) in self.probs.iter().enumerate() {
            if u < *p {
                return i;
            }
            u -= p;
        }
        self.probs.len() - 1
    }
}

/// Continuous working coordinate of a numeric parameter: ln under a log
/// prior, and integers spread over `[v, v + 1)` so they can carry kernels.
fn coordinate_bounds(p: &ParamSpec) -> (f64, f64) {
    let (lo, hi) = match p.domain {
        Domain::Integer { lo, hi } => (lo as f64, hi as f64 + 1.0),
        Domain::Real { lo, hi } => (lo, hi),
        Domain::Categorical(_) => unreachable!("categorical has no coordinate"),
    };
    match p.prior {
        Prior::Uniform => (lo, hi),
        Prior::LogUniform => (lo.ln(), hi.ln()),
    }
}

fn to_coordinate(p: &ParamSpec, v: &Value) -> f64 {
    let x = match v {
        Value::Int(i) => *i as f64 + 0.5,
        other => other.as_f64(),
    };
    match p.prior {
        Prior::Uniform => x,
        Prior::LogUniform => x.ln(),
    }
}

fn from_coordinate(p: &ParamSpec, t: f64) -> Value {
    let x = match p.prior {
        Prior::Uniform => t,
        Prior::LogUniform => t.exp(),
    };
    match p.domain {
        Domain::Integer { lo, hi } => Value::Int((x.floor() as i64).clamp(lo, hi)),
        Domain::Real { lo, hi } => Value::Real(x.clamp(lo, hi)),
        Domain::Categorical(_) => unreachable!("categorical has no coordinate"),
    }
}

/// One parameter's estimator and how many active observations built it.
#[derive(Debug, Clone, PartialEq)]
pub enum Estimator {
    Continuous(Parzen),
    Discrete(Categorical),
}

#[derive(Debug, Clone, PartialEq)]
pub struct DensityNode {
    pub estimator: Estimator,
    pub observations: usize,
}

/// One estimator per parameter, indexed like the space; evaluation walks the
/// space's condition structure and touches active parameters only.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityTree {
    pub nodes: Vec<DensityNode>,
    pub n_configs: usize,
}

pub fn build_parzen(configs: &[&Config], space: &ParamSpace) -> DensityTree {
    let nodes = space
        .params()
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let vals: Vec<&Value> = configs.iter().filter_map(|c| c.get(i)).collect();
            let estimator = match &p.domain {
                Domain::Categorical(levels) => {
                    let obs: Vec<usize> = vals.iter().filter_map(|v| v.as_level()).collect();
                    Estimator::Discrete(Categorical::new(levels.len(), &obs))
                }
                _ => {
                    let (lo, hi) = coordinate_bounds(p);
                    let pts: Vec<f64> = vals.iter().map(|v| to_coordinate(p, v)).collect();
                    Estimator::Continuous(Parzen::new(lo, hi, &pts))
                }
            };
            DensityNode { estimator, observations: vals.len() }
        })
        .collect();
    DensityTree { nodes, n_configs: configs.len() }
}

impl DensityTree {
    /// Sum of log densities of the config's active parameters.
    pub fn log_density(&self, space: &ParamSpace, config: &Config) -> f64 {
        let active = space.active_mask(config);
        let mut s = 0.0;
        for &i in space.topological_order() {
            if !active[i] {
                continue;
            }
            let v = config.get(i).expect("active parameter is assigned");
            s += match &self.nodes[i].estimator {
                Estimator::Discrete(c) => c.probs[v.as_level().expect("level value")].ln(),
                Estimator::Continuous(p) => p.pdf(to_coordinate(&space.params()[i], v)).ln(),
            };
        }
        s
    }

    pub fn density(&self, space: &ParamSpace, config: &Config) -> f64 {
        self.log_density(space, config).exp()
    }

    /// Ancestral sample; parameters this tree never observed come from the prior.
    pub fn sample<R: Rng + ?Sized>(&self, space: &ParamSpace, rng: &mut R) -> Config {
        space.build_config(|i, p| {
            let node = &self.nodes[i];
            if node.observations == 0 {
                return p.sample_prior(rng);
            }
            match &node.estimator {
                Estimator::Discrete(c) => Value::Level(c.sample(rng)),
                Estimator::Continuous(z) => from_coordinate(p, z.sample(rng)),
            }
        })
    }
}

/// `(gamma + (g / l)(1 - gamma))^-1`; decreasing in g/l.
pub fn ei_score(gamma: f64, l_density: f64, g_density: f64) -> Result<f64, TpeError> {
    if l_density.is_nan() || l_density <= 0.0 {
        return Err(TpeError::NonpositiveDensity(l_density));
    }
    Ok(1.0 / (gamma + g_density / l_density * (1.0 - gamma)))
}

/// A chosen candidate and its log density ratio `ln g - ln l`.
#[derive(Debug, Clone, PartialEq)]
pub struct Proposal {
    pub config: Config,
    pub log_ratio: f64,
}

/// Index of the candidate with the smallest g/l; the first one wins ties.
pub fn select_candidate(l: &DensityTree, g: &DensityTree, space: &ParamSpace, candidates: &[Config]) -> Option<(usize, f64)> {
    candidates
        .iter()
        .map(|c| g.log_density(space, c) - l.log_density(space, c))
        .enumerate()
        .fold(None, |best: Option<(usize, f64)>, (i, r)| match best {
            Some((_, b)) if b <= r => best,
            _ => Some((i, r)),
        })
}

/// Draws `n_candidates` configs from `l` and returns the one minimizing g/l.
pub fn propose_tpe<R: Rng + ?Sized>(
    l: &DensityTree,
    g: &DensityTree,
    space: &ParamSpace,
    n_candidates: usize,
    rng: &mut R,
) -> Proposal {
    let candidates: Vec<Config> = (0..n_candidates.max(1)).map(|_| l.sample(space, rng)).collect();
    let (i, log_ratio) = select_candidate(l, g, space, &candidates).expect("at least one candidate");
    Proposal { config: candidates[i].clone(), log_ratio }
}

/// The TPE strategy; every proposal is evaluated on all folds.
#[derive(Debug, Clone)]
pub struct Tpe {
    pub gamma: f64,
    pub n_candidates: usize,
    pub startup: usize,
    rng: ChaCha8Rng,
    tracker: FullCvIncumbent,
    last_score: Option<f64>,
}

impl Default for Tpe {
    fn default() -> Self {
        Self::new(DEFAULT_GAMMA, DEFAULT_CANDIDATES, DEFAULT_STARTUP)
    }
}

impl Tpe {
    pub fn new(gamma: f64, n_candidates: usize, startup: usize) -> Self {
        Self {
            gamma,
            n_candidates,
            startup,
            rng: ChaCha8Rng::seed_from_u64(0),
            tracker: FullCvIncumbent::default(),
            last_score: None,
        }
    }

    /// EI score of the most recent model-based proposal.
    pub fn last_score(&self) -> Option<f64> {
        self.last_score
    }
}

impl OptimizerStrategy for Tpe {
    fn name(&self) -> &'static str {
        "tpe"
    }

    fn initialize(&mut self, _space: &ParamSpace, _n_folds: usize, seed: u64) {
        *self = Self::new(self.gamma, self.n_candidates, self.startup);
        self.rng = ChaCha8Rng::seed_from_u64(seed);
    }

    fn propose(&mut self, space: &ParamSpace, history: &RunHistory) -> Config {
        let observed = (0..history.configs().len()).filter(|&id| history.mean_loss(id).is_some()).count();
        if observed < self.startup.max(2) {
            return space.sample_random(&mut self.rng);
        }
        let split = split_history(history, self.gamma).expect("enough observations");
        let side = |ids: &[usize]| ids.iter().map(|&id| history.config(id)).collect::<Vec<_>>();
        let l = build_parzen(&side(&split.good), space);
        let g = build_parzen(&side(&split.bad), space);
        let p = propose_tpe(&l, &g, space, self.n_candidates, &mut self.rng);
        self.last_score = ei_score(self.gamma, 1.0, p.log_ratio.exp()).ok();
        p.config
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
