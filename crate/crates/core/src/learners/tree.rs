use rand::seq::index::sample;
use rand::Rng;

use super::{normalize, rng_for, Budget, LearnError, Samples, SplitCriterion};
use crate::dataspace::AttrKind;

#[derive(Debug, Clone)]
pub(crate) struct TreeParams {
    pub max_depth: usize,
    pub min_leaf: usize,
    pub criterion: SplitCriterion,
    /// Attributes considered per split; `None` means all.
    pub max_features: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Test {
    /// `x <= t` goes left.
    Threshold(f64),
    /// `x == level` goes left.
    Level(f64),
}

#[derive(Debug, Clone)]
enum Node {
    Leaf(Vec<f64>),
    Split { attr: usize, test: Test, left: usize, right: usize },
}

/// Classification tree with binary splits and distribution leaves.
#[derive(Debug, Clone)]
pub(crate) struct Tree {
    nodes: Vec<Node>,
}

fn impurity(dist: &[f64], total: f64, criterion: SplitCriterion) -> f64 {
    if total <= 0.0 {
        return 0.0;
    }
    match criterion {
        SplitCriterion::Gini => 1.0 - dist.iter().map(|d| (d / total).powi(2)).sum::<f64>(),
        SplitCriterion::Entropy => -dist
            .iter()
            .filter(|&&d| d > 0.0)
            .map(|d| {
                let p = d / total;
                p * p.ln()
            })
            .sum::<f64>(),
    }
}

struct Best {
    gain: f64,
    attr: usize,
    test: Test,
}

impl Tree {
    pub fn fit<R: Rng + ?Sized>(
        samples: &Samples<'_>,
        params: &TreeParams,
        budget: &mut Budget,
        rng: &mut R,
    ) -> Result<Self, LearnError> {
        let mut tree = Tree { nodes: Vec::new() };
        let all: Vec<usize> = (0..samples.len()).filter(|&s| samples.w[s] > 0.0).collect();
        tree.grow(samples, all, 0, params, budget, rng)?;
        Ok(tree)
    }

    fn grow<R: Rng + ?Sized>(
        &mut self,
        samples: &Samples<'_>,
        members: Vec<usize>,
        depth: usize,
        params: &TreeParams,
        budget: &mut Budget,
        rng: &mut R,
    ) -> Result<usize, LearnError> {
        let c = samples.n_classes();
        let mut dist = vec![0.0; c];
        for &s in &members {
            dist[samples.label(s)] += samples.w[s];
        }
        let total: f64 = dist.iter().sum();
        let id = self.nodes.len();
        self.nodes.push(Node::Leaf(normalize(dist.clone())));

        let pure = dist.iter().filter(|&&d| d > 0.0).count() <= 1;
        let min_leaf = params.min_leaf.max(1);
        if pure || depth >= params.max_depth || members.len() < 2 * min_leaf {
            return Ok(id);
        }

        let d = samples.data.n_attributes();
        let candidates: Vec<usize> = match params.max_features {
            Some(m) if m < d => {
                let mut v = sample(rng, d, m.max(1)).into_vec();
                v.sort_unstable();
                v
            }
            _ => (0..d).collect(),
        };
        budget.charge((members.len() * candidates.len().max(1)) as u64)?;

        let parent = impurity(&dist, total, params.criterion);
        let mut best: Option<Best> = None;
        let attrs = samples.data.attributes();
        for &a in &candidates {
            match &attrs[a].kind {
                AttrKind::Numeric => {
                    let mut sorted = members.clone();
                    sorted.sort_by(|&i, &j| samples.row(i)[a].total_cmp(&samples.row(j)[a]));
                    let mut left = vec![0.0; c];
                    let mut left_w = 0.0;
                    for pos in 0..sorted.len() - 1 {
                        let s = sorted[pos];
                        left[samples.label(s)] += samples.w[s];
                        left_w += samples.w[s];
                        let x = samples.row(s)[a];
                        let nx = samples.row(sorted[pos + 1])[a];
                        let n_left = pos + 1;
                        if nx <= x || n_left < min_leaf || sorted.len() - n_left < min_leaf {
                            continue;
                        }
                        let right: Vec<f64> = dist.iter().zip(&left).map(|(t, l)| t - l).collect();
                        let right_w = total - left_w;
                        let child = (left_w * impurity(&left, left_w, params.criterion)
                            + right_w * impurity(&right, right_w, params.criterion))
                            / total;
                        let gain = parent - child;
                        if best.as_ref().is_none_or(|b| gain > b.gain + 1e-12) {
                            best = Some(Best { gain, attr: a, test: Test::Threshold((x + nx) / 2.0) });
                        }
                    }
                }
                AttrKind::Categorical { levels } => {
                    let mut per_level = vec![vec![0.0; c]; levels.len()];
                    let mut per_count = vec![0usize; levels.len()];
                    for &s in &members {
                        let l = samples.row(s)[a] as usize;
                        per_level[l][samples.label(s)] += samples.w[s];
                        per_count[l] += 1;
                    }
                    for l in 0..levels.len() {
                        if per_count[l] < min_leaf || members.len() - per_count[l] < min_leaf {
                            continue;
                        }
                        let left = &per_level[l];
                        let left_w: f64 = left.iter().sum();
                        let right: Vec<f64> = dist.iter().zip(left).map(|(t, l)| t - l).collect();
                        let right_w = total - left_w;
                        let child = (left_w * impurity(left, left_w, params.criterion)
                            + right_w * impurity(&right, right_w, params.criterion))
                            / total;
                        let gain = parent - child;
                        if best.as_ref().is_none_or(|b| gain > b.gain + 1e-12) {
                            best = Some(Best { gain, attr: a, test: Test::Level(l as f64) });
                        }
                    }
                }
            }
        }

        let Some(best) = best.filter(|b| b.gain > 1e-12) else {
            return Ok(id);
        };
        let (l_members, r_members): (Vec<usize>, Vec<usize>) = members
            .into_iter()
            .partition(|&s| goes_left(best.test, samples.row(s)[best.attr]));
        let left = self.grow(samples, l_members, depth + 1, params, budget, rng)?;
        let right = self.grow(samples, r_members, depth + 1, params, budget, rng)?;
        self.nodes[id] = Node::Split { attr: best.attr, test: best.test, left, right };
        Ok(id)
    }

    pub fn distribution(&self, row: &[f64]) -> &[f64] {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                Node::Leaf(d) => return d,
                Node::Split { attr, test, left, right } => {
                    i = if goes_left(*test, row[*attr]) { *left } else { *right };
                }
            }
        }
    }

    #[cfg(test)]
    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], i: usize) -> usize {
            match &nodes[i] {
                Node::Leaf(_) => 0,
                Node::Split { left, right, .. } => 1 + walk(nodes, *left).max(walk(nodes, *right)),
            }
        }
        walk(&self.nodes, 0)
    }
}

fn goes_left(test: Test, x: f64) -> bool {
    match test {
        Test::Threshold(t) => x <= t,
        Test::Level(l) => x == l,
    }
}

/// Random forest: bootstrap samples and a random attribute subset per split.
pub(crate) fn fit_forest(
    samples: &Samples<'_>,
    trees: usize,
    feature_fraction: f64,
    max_depth: usize,
    budget: &mut Budget,
    seed: u64,
) -> Result<Vec<Tree>, LearnError> {
    let d = samples.data.n_attributes();
    let m = ((feature_fraction * d as f64).round() as usize).clamp(1, d.max(1));
    let params = TreeParams {
        max_depth,
        min_leaf: 1,
        criterion: SplitCriterion::Gini,
        max_features: Some(m),
    };
    let n = samples.len();
    let mut out = Vec::with_capacity(trees);
    for t in 0..trees.max(1) {
        let mut rng = rng_for(seed, 100 + t as u64);
        let mut counts = vec![0.0; n];
        for _ in 0..n {
            counts[rng.random_range(0..n)] += 1.0;
        }
        let boot = Samples {
            data: samples.data,
            idx: samples.idx.clone(),
            w: counts.iter().zip(&samples.w).map(|(c, w)| c * w).collect(),
        };
        out.push(Tree::fit(&boot, &params, budget, &mut rng)?);
    }
    Ok(out)
}
