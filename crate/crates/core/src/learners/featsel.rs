//! Attribute selection run before classifier training: a search method
//! (ranker or greedy forward selection) driven by an attribute evaluator
//! (information gain or class-indicator Pearson correlation).

use std::collections::HashMap;

use super::{Budget, LearnError};
use crate::dataspace::{AttrKind, Dataset};

/// Equal-width bins used to discretize numeric attributes for info gain.
pub const INFO_GAIN_BINS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FeatureSearch {
    Ranker,
    GreedyForward,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FeatureEvaluator {
    InfoGain,
    PearsonCorrelation,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatSelConfig {
    pub search: FeatureSearch,
    pub evaluator: FeatureEvaluator,
    /// Ranker: fraction of attributes kept, in (0, 1].
    pub keep_fraction: f64,
    /// Greedy forward: minimum score improvement to accept another attribute.
    pub min_gain: f64,
}

/// Fitted selector: the kept attribute indices, ascending.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureSelector {
    attributes: Vec<usize>,
    scores: Vec<f64>,
}

impl FeatureSelector {
    pub fn attributes(&self) -> &[usize] {
        &self.attributes
    }

    /// Per-attribute evaluator scores over the full input arity.
    pub fn scores(&self) -> &[f64] {
        &self.scores
    }

    pub fn transform(&self, data: &Dataset) -> Dataset {
        data.project(&self.attributes)
    }
}

fn entropy(counts: &[f64]) -> f64 {
    let total: f64 = counts.iter().sum();
    if total <= 0.0 {
        return 0.0;
    }
    -counts
        .iter()
        .filter(|&&c| c > 0.0)
        .map(|c| {
            let p = c / total;
            p * p.log2()
        })
        .sum::<f64>()
}

/// Discrete code per row for one attribute: level index, or equal-width bin.
fn codes(data: &Dataset, a: usize) -> Vec<usize> {
    match &data.attributes()[a].kind {
        AttrKind::Categorical { .. } => data.rows().iter().map(|r| r[a] as usize).collect(),
        AttrKind::Numeric => {
            let (lo, hi) = data
                .rows()
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), r| (l.min(r[a]), h.max(r[a])));
            if hi <= lo {
                return vec![0; data.len()];
            }
            let width = (hi - lo) / INFO_GAIN_BINS as f64;
            data.rows()
                .iter()
                .map(|r| (((r[a] - lo) / width).floor() as usize).min(INFO_GAIN_BINS - 1))
                .collect()
        }
    }
}

/// H(Y) - H(Y | X) where X is the joint code of the given per-attribute codes.
fn joint_info_gain(data: &Dataset, columns: &[&[usize]]) -> f64 {
    let c = data.n_classes();
    let h_y = entropy(&data.class_counts().iter().map(|&x| x as f64).collect::<Vec<_>>());
    let mut cells: HashMap<Vec<usize>, Vec<f64>> = HashMap::new();
    for (i, &y) in data.labels().iter().enumerate() {
        let key: Vec<usize> = columns.iter().map(|col| col[i]).collect();
        cells.entry(key).or_insert_with(|| vec![0.0; c])[y] += 1.0;
    }
    let n = data.len() as f64;
    let h_y_x: f64 = cells.values().map(|cnt| cnt.iter().sum::<f64>() / n * entropy(cnt)).sum();
    (h_y - h_y_x).max(0.0)
}

/// Information gain of every attribute, in bits.
pub fn info_gain_scores(data: &Dataset) -> Vec<f64> {
    (0..data.n_attributes())
        .map(|a| {
            let col = codes(data, a);
            joint_info_gain(data, &[&col])
        })
        .collect()
}

fn pearson(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx).powi(2);
        syy += (b - my).powi(2);
    }
    if sxx <= 0.0 || syy <= 0.0 {
        0.0
    } else {
        sxy / (sxx * syy).sqrt()
    }
}

fn column(data: &Dataset, a: usize) -> Vec<f64> {
    data.rows().iter().map(|r| r[a]).collect()
}

/// Class-frequency weighted mean of |corr(X, 1[Y = c])| over classes.
pub fn pearson_scores(data: &Dataset) -> Vec<f64> {
    let n = data.len() as f64;
    let counts = data.class_counts();
    let indicators: Vec<Vec<f64>> = (0..data.n_classes())
        .map(|c| data.labels().iter().map(|&y| if y == c { 1.0 } else { 0.0 }).collect())
        .collect();
    (0..data.n_attributes())
        .map(|a| {
            let x = column(data, a);
            indicators
                .iter()
                .zip(&counts)
                .map(|(ind, &cnt)| cnt as f64 / n * pearson(&x, ind).abs())
                .sum()
        })
        .collect()
}

pub fn select_features(
    cfg: &FeatSelConfig,
    data: &Dataset,
    budget: &mut Budget,
) -> Result<FeatureSelector, LearnError> {
    let d = data.n_attributes();
    if d == 0 {
        return Err(LearnError::InvalidConfig("no attributes to select from".into()));
    }
    budget.charge((data.len() * d) as u64)?;
    let scores = match cfg.evaluator {
        FeatureEvaluator::InfoGain => info_gain_scores(data),
        FeatureEvaluator::PearsonCorrelation => pearson_scores(data),
    };
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));

    let mut attributes = match cfg.search {
        FeatureSearch::Ranker => {
            let keep = ((cfg.keep_fraction.clamp(0.0, 1.0) * d as f64).ceil() as usize).clamp(1, d);
            order[..keep].to_vec()
        }
        FeatureSearch::GreedyForward => greedy_forward(cfg, data, &scores, &order, budget)?,
    };
    attributes.sort_unstable();
    Ok(FeatureSelector { attributes, scores })
}

fn greedy_forward(
    cfg: &FeatSelConfig,
    data: &Dataset,
    scores: &[f64],
    order: &[usize],
    budget: &mut Budget,
) -> Result<Vec<usize>, LearnError> {
    let d = data.n_attributes();
    let mut chosen = vec![order[0]];
    let mut current = scores[order[0]];

    match cfg.evaluator {
        FeatureEvaluator::InfoGain => {
            let all_codes: Vec<Vec<usize>> = (0..d).map(|a| codes(data, a)).collect();
            loop {
                budget.charge((data.len() * (d - chosen.len()).max(1)) as u64)?;
                let mut best: Option<(f64, usize)> = None;
                for a in (0..d).filter(|a| !chosen.contains(a)) {
                    let mut cols: Vec<&[usize]> = chosen.iter().map(|&c| all_codes[c].as_slice()).collect();
                    cols.push(&all_codes[a]);
                    let s = joint_info_gain(data, &cols);
                    if best.is_none_or(|(b, _)| s > b) {
                        best = Some((s, a));
                    }
                }
                match best {
                    Some((s, a)) if s - current > cfg.min_gain => {
                        chosen.push(a);
                        current = s;
                    }
                    _ => break,
                }
            }
        }
        FeatureEvaluator::PearsonCorrelation => {
            // Correlation-based subset merit: k * r_cf / sqrt(k + k(k-1) r_ff).
            let cols: Vec<Vec<f64>> = (0..d).map(|a| column(data, a)).collect();
            let mut inter = vec![vec![f64::NAN; d]; d];
            let r_ff = |i: usize, j: usize, inter: &mut Vec<Vec<f64>>| {
                if inter[i][j].is_nan() {
                    let r = pearson(&cols[i], &cols[j]).abs();
                    inter[i][j] = r;
                    inter[j][i] = r;
                }
                inter[i][j]
            };
            loop {
                budget.charge((data.len() * (d - chosen.len()).max(1)) as u64)?;
                let mut best: Option<(f64, usize)> = None;
                for a in (0..d).filter(|a| !chosen.contains(a)) {
                    let mut set = chosen.clone();
                    set.push(a);
                    let k = set.len() as f64;
                    let rcf = set.iter().map(|&i| scores[i]).sum::<f64>() / k;
                    let mut rff_sum = 0.0;
                    for x in 0..set.len() {
                        for y in x + 1..set.len() {
                            rff_sum += r_ff(set[x], set[y], &mut inter);
                        }
                    }
                    let pairs = k * (k - 1.0) / 2.0;
                    let rff = if pairs > 0.0 { rff_sum / pairs } else { 0.0 };
                    let merit = k * rcf / (k + k * (k - 1.0) * rff).sqrt();
                    if best.is_none_or(|(b, _)| merit > b) {
                        best = Some((merit, a));
                    }
                }
                match best {
                    Some((s, a)) if s - current > cfg.min_gain => {
                        chosen.push(a);
                        current = s;
                    }
                    _ => break,
                }
            }
        }
    }
    Ok(chosen)
}
