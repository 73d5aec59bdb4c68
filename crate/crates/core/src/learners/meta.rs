use rand::Rng;

use super::{derive_seed, fit, rng_for, Budget, LearnError, LearnerSpec, Model, Samples};

/// Vote weight given to a base model with zero weighted training error.
const PERFECT_MODEL_WEIGHT: f64 = 23.0; // ln(1e10)

pub(crate) struct Boosted {
    pub members: Vec<(Model, f64)>,
    /// Sum of the instance weight distribution after each reweighting round.
    #[cfg_attr(not(test), allow(dead_code))]
    pub weight_sums: Vec<f64>,
}

/// AdaBoost.M1 by reweighting.
pub(crate) fn adaboost_m1(
    samples: &Samples<'_>,
    iterations: usize,
    base: &LearnerSpec,
    budget: &mut Budget,
    seed: u64,
) -> Result<Boosted, LearnError> {
    let n = samples.len();
    let total: f64 = samples.w.iter().sum();
    let mut weights: Vec<f64> = samples.w.iter().map(|w| w / total).collect();
    let mut members = Vec::new();
    let mut weight_sums = Vec::new();

    for t in 0..iterations.max(1) {
        let view = Samples { data: samples.data, idx: samples.idx.clone(), w: weights.clone() };
        let model = fit(base, &view, budget, derive_seed(seed, 200 + t as u64))?;
        let n_classes = samples.n_classes();
        let correct: Vec<bool> = (0..n)
            .map(|s| model.predict_row(samples.row(s), n_classes) == samples.label(s))
            .collect();
        let err: f64 = (0..n).filter(|&s| !correct[s]).map(|s| weights[s]).sum();
        if err <= 0.0 {
            members.push((model, PERFECT_MODEL_WEIGHT));
            break;
        }
        if err >= 0.5 {
            if members.is_empty() {
                members.push((model, 1.0));
            }
            break;
        }
        let beta = err / (1.0 - err);
        members.push((model, (1.0 / beta).ln()));
        for s in 0..n {
            if correct[s] {
                weights[s] *= beta;
            }
        }
        let sum: f64 = weights.iter().sum();
        weights.iter_mut().for_each(|w| *w /= sum);
        weight_sums.push(weights.iter().sum());
    }
    Ok(Boosted { members, weight_sums })
}

/// Bagging: `iterations` bootstrap replicates of `bag_fraction * n` samples.
/// With a fraction of 1.0 and a single bag the whole training set is used
/// as-is, so the ensemble reduces to its base learner.
pub(crate) fn bagging(
    samples: &Samples<'_>,
    iterations: usize,
    bag_fraction: f64,
    base: &LearnerSpec,
    budget: &mut Budget,
    seed: u64,
) -> Result<Vec<Model>, LearnError> {
    let n = samples.len();
    if iterations <= 1 && bag_fraction >= 1.0 {
        return Ok(vec![fit(base, samples, budget, derive_seed(seed, 300))?]);
    }
    let m = ((bag_fraction * n as f64).round() as usize).max(1);
    let mut out = Vec::with_capacity(iterations);
    for t in 0..iterations.max(1) {
        let mut rng = rng_for(seed, 300 + t as u64);
        let idx: Vec<usize> = (0..m).map(|_| samples.idx[rng.random_range(0..n)]).collect();
        let w = vec![1.0; m];
        let view = Samples { data: samples.data, idx, w };
        out.push(fit(base, &view, budget, derive_seed(seed, 400 + t as u64))?);
    }
    Ok(out)
}

/// Majority vote over independently trained bases.
pub(crate) fn voting(
    samples: &Samples<'_>,
    bases: &[LearnerSpec],
    budget: &mut Budget,
    seed: u64,
) -> Result<Vec<Model>, LearnError> {
    bases
        .iter()
        .enumerate()
        .map(|(i, b)| fit(b, samples, budget, derive_seed(seed, 500 + i as u64)))
        .collect()
}
