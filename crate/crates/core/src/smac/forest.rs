use rand::seq::index::sample;
use rand::Rng;

use crate::evaluator::RunHistory;
use crate::paramspace::{FeatureVector, ParamSpace};

/// Surrogate forest settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ForestParams {
    pub trees: usize,
    pub min_leaf: usize,
    pub feature_fraction: f64,
}

impl Default for ForestParams {
    fn default() -> Self {
        Self { trees: 64, min_leaf: 3, feature_fraction: 5.0 / 6.0 }
    }
}

/// Predictive mean and variance of the loss at a point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Posterior {
    pub mu: f64,
    pub sigma2: f64,
}

impl Posterior {
    /// Mean and population variance of per-tree predictions.
    pub fn from_predictions(preds: &[f64]) -> Self {
        let n = preds.len() as f64;
        let mu = preds.iter().sum::<f64>() / n;
        let sigma2 = preds.iter().map(|p| (p - mu) * (p - mu)).sum::<f64>() / n;
        Self { mu, sigma2 }
    }
}

#[derive(Debug, Clone)]
enum Node {
    Leaf(f64),
    Split { feature: usize, threshold: f64, left: usize, right: usize },
}

#[derive(Debug, Clone)]
struct RegTree {
    nodes: Vec<Node>,
}

impl RegTree {
    fn predict(&self, x: &[f64]) -> f64 {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                Node::Leaf(v) => return *v,
                Node::Split { feature, threshold, left, right } => {
                    i = if x[*feature] <= *threshold { *left } else { *right };
                }
            }
        }
    }

    fn grow<R: Rng + ?Sized>(
        &mut self,
        xs: &[Vec<f64>],
        ys: &[f64],
        members: Vec<usize>,
        params: &ForestParams,
        rng: &mut R,
    ) -> usize {
        let n = members.len();
        let mean = members.iter().map(|&i| ys[i]).sum::<f64>() / n as f64;
        let id = self.nodes.len();
        self.nodes.push(Node::Leaf(mean));
        let min_leaf = params.min_leaf.max(1);
        if n < 2 * min_leaf {
            return id;
        }
        let sse: f64 = members.iter().map(|&i| (ys[i] - mean).powi(2)).sum();
        if sse <= 1e-12 {
            return id;
        }

        let d = xs[0].len();
        let m = ((params.feature_fraction * d as f64).ceil() as usize).clamp(1, d);
        let mut features = sample(rng, d, m).into_vec();
        features.sort_unstable();

        let mut best: Option<(f64, usize, f64)> = None;
        let mut sorted = members.clone();
        for &f in &features {
            let (lo, hi) = members
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &i| (l.min(xs[i][f]), h.max(xs[i][f])));
            if hi <= lo {
                continue;
            }
            sorted.sort_by(|&a, &b| xs[a][f].total_cmp(&xs[b][f]));
            let total: f64 = sorted.iter().map(|&i| ys[i]).sum();
            let total_sq: f64 = sorted.iter().map(|&i| ys[i] * ys[i]).sum();
            let (mut s, mut sq) = (0.0, 0.0);
            for pos in 0..n - 1 {
                let y = ys[sorted[pos]];
                s += y;
                sq += y * y;
                let nl = pos + 1;
                let (x, nx) = (xs[sorted[pos]][f], xs[sorted[pos + 1]][f]);
                if nx <= x || nl < min_leaf || n - nl < min_leaf {
                    continue;
                }
                let nr = (n - nl) as f64;
                let child = (sq - s * s / nl as f64) + ((total_sq - sq) - (total - s).powi(2) / nr);
                if best.is_none_or(|(b, _, _)| child < b) {
                    best = Some((child, f, (x + nx) / 2.0));
                }
            }
        }
        let Some((child, feature, threshold)) = best else { return id };
        if sse - child <= 1e-12 {
            return id;
        }
        let (l, r): (Vec<usize>, Vec<usize>) = members.into_iter().partition(|&i| xs[i][feature] <= threshold);
        let left = self.grow(xs, ys, l, params, rng);
        let right = self.grow(xs, ys, r, params, rng);
        self.nodes[id] = Node::Split { feature, threshold, left, right };
        id
    }
}

/// Random forest regression over encoded configurations.
#[derive(Debug, Clone)]
pub struct RegressionForest {
    trees: Vec<RegTree>,
}

impl RegressionForest {
    /// Each tree is grown on a bootstrap sample of `(xs, ys)`.
    pub fn fit<R: Rng + ?Sized>(xs: &[Vec<f64>], ys: &[f64], params: &ForestParams, rng: &mut R) -> Self {
        assert!(!xs.is_empty() && xs.len() == ys.len(), "forest needs matching nonempty data");
        let n = xs.len();
        let trees = (0..params.trees.max(1))
            .map(|_| {
                let boot: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
                let mut t = RegTree { nodes: Vec::new() };
                t.grow(xs, ys, boot, params, rng);
                t
            })
            .collect();
        Self { trees }
    }

    /// Fits on every config with at least one evaluated fold, targeting its
    /// mean loss over those folds. `None` for an empty history.
    pub fn fit_history<R: Rng + ?Sized>(
        history: &RunHistory,
        space: &ParamSpace,
        params: &ForestParams,
        rng: &mut R,
    ) -> Option<Self> {
        let (mut xs, mut ys) = (Vec::new(), Vec::new());
        for (id, c) in history.configs().iter().enumerate() {
            if let Some(m) = history.mean_loss(id) {
                xs.push(space.impute_defaults(c).0);
                ys.push(m);
            }
        }
        (!xs.is_empty()).then(|| Self::fit(&xs, &ys, params, rng))
    }

    pub fn tree_predictions(&self, x: &[f64]) -> Vec<f64> {
        self.trees.iter().map(|t| t.predict(x)).collect()
    }

    pub fn predict(&self, x: &FeatureVector) -> Posterior {
        Posterior::from_predictions(&self.tree_predictions(&x.0))
    }

    pub fn n_trees(&self) -> usize {
        self.trees.len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::learners::rng_for;

    #[test]
    fn single_point_forest_is_certain() {
        let f = RegressionForest::fit(&[vec![0.4, 1.0]], &[0.3], &ForestParams::default(), &mut rng_for(0, 0));
        let p = f.predict(&FeatureVector(vec![0.9, 0.0]));
        assert!((p.mu - 0.3).abs() < 1e-12 && p.sigma2 < 1e-20);
    }

    #[test]
    fn two_point_prediction_stays_in_range() {
        let params = ForestParams { trees: 200, min_leaf: 1, feature_fraction: 1.0 };
        let f = RegressionForest::fit(&[vec![0.0], vec![1.0]], &[0.2, 0.8], &params, &mut rng_for(1, 0));
        let p = f.predict(&FeatureVector(vec![0.0]));
        assert!((0.2..=0.8).contains(&p.mu));
        assert!(p.sigma2 > 0.0);
    }

    #[test]
    fn posterior_moments() {
        assert_eq!(Posterior::from_predictions(&[0.5; 7]), Posterior { mu: 0.5, sigma2: 0.0 });
        let p = Posterior::from_predictions(&[0.2, 0.4]);
        assert!((p.mu - 0.3).abs() < 1e-15 && (p.sigma2 - 0.01).abs() < 1e-15);

        let preds = [0.11, 0.52, 0.3, 0.9, 0.05, 0.47, 0.66, 0.2, 0.38, 0.71];
        let mut s = 0.0;
        for p in preds {
            s += p;
        }
        let mean = s / 10.0;
        let mut v = 0.0;
        for p in preds {
            v += (p - mean) * (p - mean);
        }
        let p = Posterior::from_predictions(&preds);
        assert!((p.mu - mean).abs() <= 1e-15 && (p.sigma2 - v / 10.0).abs() <= 1e-15);
    }

    #[test]
    fn forest_beats_constant_predictor_on_step() {
        let xs: Vec<Vec<f64>> = (0..50).map(|i| vec![i as f64 / 49.0]).collect();
        let ys: Vec<f64> = xs.iter().map(|x| if x[0] < 0.5 { 0.2 } else { 0.7 }).collect();
        let f = RegressionForest::fit(&xs, &ys, &ForestParams::default(), &mut rng_for(2, 0));
        let mean = ys.iter().sum::<f64>() / 50.0;
        let var = ys.iter().map(|y| (y - mean).powi(2)).sum::<f64>() / 50.0;
        let mse = xs
            .iter()
            .zip(&ys)
            .map(|(x, y)| (f.predict(&FeatureVector(x.clone())).mu - y).powi(2))
            .sum::<f64>()
            / 50.0;
        assert!(mse < var, "mse {mse} vs variance {var}");
    }

    #[test]
    fn leaves_hold_min_leaf_points() {
        let xs: Vec<Vec<f64>> = (0..40).map(|i| vec![(i * 13 % 40) as f64]).collect();
        let ys: Vec<f64> = (0..40).map(|i| (i as f64).sin()).collect();
        let params = ForestParams { trees: 5, min_leaf: 3, feature_fraction: 1.0 };
        let mut rng = rng_for(3, 0);
        let n = xs.len();
        let boot: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
        let mut t = RegTree { nodes: Vec::new() };
        t.grow(&xs, &ys, boot.clone(), &params, &mut rng);
        let mut counts = vec![0usize; t.nodes.len()];
        for &i in &boot {
            let mut node = 0;
            while let Node::Split { feature, threshold, left, right } = &t.nodes[node] {
                node = if xs[i][*feature] <= *threshold { *left } else { *right };
            }
            counts[node] += 1;
        }
        for (i, node) in t.nodes.iter().enumerate() {
            if matches!(node, Node::Leaf(_)) {
                assert!(counts[i] >= 3);
            }
        }
    }
}
