use rand::seq::SliceRandom;
use rand::Rng;

use super::{argmax, normalize, Budget, KnnWeighting, LearnError, Samples};
use crate::dataspace::AttrKind;

/// Weighted class distribution; its argmax is the 0-R prediction.
pub(crate) fn zero_r(samples: &Samples<'_>) -> Vec<f64> {
    normalize(samples.class_weights())
}

fn onehot(class: usize, n_classes: usize) -> Vec<f64> {
    let mut v = vec![0.0; n_classes];
    v[class] = 1.0;
    v
}

#[derive(Debug, Clone)]
enum Rule {
    /// Class per level; `fallback` for levels not seen in training.
    Levels { classes: Vec<Option<usize>>, fallback: usize },
    /// Sorted upper bounds; value `<= bounds[i]` maps to `classes[i]`, the
    /// last class covers everything above.
    Intervals { bounds: Vec<f64>, classes: Vec<usize> },
}

/// 1-R: a single-attribute rule chosen by minimal weighted training error.
#[derive(Debug, Clone)]
pub(crate) struct OneRule {
    attr: usize,
    rule: Rule,
}

impl OneRule {
    pub fn fit(samples: &Samples<'_>, min_bucket: usize, budget: &mut Budget) -> Result<Self, LearnError> {
        let d = samples.data.n_attributes();
        let c = samples.n_classes();
        budget.charge((samples.len() * d.max(1)) as u64)?;
        let overall = argmax(&samples.class_weights());
        let total: f64 = samples.w.iter().sum();

        let mut best: Option<(f64, OneRule)> = None;
        for a in 0..d {
            let (err, rule) = match &samples.data.attributes()[a].kind {
                AttrKind::Categorical { levels } => {
                    let mut counts = vec![vec![0.0; c]; levels.len()];
                    for s in 0..samples.len() {
                        counts[samples.row(s)[a] as usize][samples.label(s)] += samples.w[s];
                    }
                    let mut correct = 0.0;
                    let classes = counts
                        .iter()
                        .map(|cnt| {
                            if cnt.iter().all(|&x| x == 0.0) {
                                None
                            } else {
                                let k = argmax(cnt);
                                correct += cnt[k];
                                Some(k)
                            }
                        })
                        .collect();
                    (total - correct, Rule::Levels { classes, fallback: overall })
                }
                AttrKind::Numeric => numeric_rule(samples, a, min_bucket.max(1)),
            };
            if best.as_ref().is_none_or(|(e, _)| err < *e - 1e-12) {
                best = Some((err, OneRule { attr: a, rule }));
            }
        }
        Ok(best.map(|(_, r)| r).unwrap_or(OneRule {
            attr: 0,
            rule: Rule::Levels { classes: Vec::new(), fallback: overall },
        }))
    }

    fn class_of(&self, row: &[f64]) -> usize {
        let x = row[self.attr];
        match &self.rule {
            Rule::Levels { classes, fallback } => classes
                .get(x as usize)
                .copied()
                .flatten()
                .unwrap_or(*fallback),
            Rule::Intervals { bounds, classes } => {
                let i = bounds.iter().position(|&b| x <= b).unwrap_or(bounds.len());
                classes[i]
            }
        }
    }

    pub fn distribution(&self, row: &[f64], n_classes: usize) -> Vec<f64> {
        onehot(self.class_of(row), n_classes)
    }
}

/// Buckets sorted values so each bucket's majority class has weight at least
/// `min_bucket`, then merges neighbours that predict the same class.
fn numeric_rule(samples: &Samples<'_>, a: usize, min_bucket: usize) -> (f64, Rule) {
    let c = samples.n_classes();
    let mut order: Vec<usize> = (0..samples.len()).collect();
    order.sort_by(|&i, &j| samples.row(i)[a].total_cmp(&samples.row(j)[a]).then(i.cmp(&j)));

    let mut bounds: Vec<f64> = Vec::new();
    let mut buckets: Vec<Vec<f64>> = Vec::new();
    let mut cur = vec![0.0; c];
    for (pos, &s) in order.iter().enumerate() {
        cur[samples.label(s)] += samples.w[s];
        let Some(&next) = order.get(pos + 1) else { break };
        let x = samples.row(s)[a];
        let nx = samples.row(next)[a];
        let maj = argmax(&cur);
        if cur[maj] >= min_bucket as f64 && nx > x && samples.label(next) != maj {
            bounds.push((x + nx) / 2.0);
            buckets.push(std::mem::replace(&mut cur, vec![0.0; c]));
        }
    }
    buckets.push(cur);

    let mut m_bounds = Vec::new();
    let mut m_classes: Vec<usize> = Vec::new();
    let mut correct = 0.0;
    for (i, b) in buckets.iter().enumerate() {
        let k = argmax(b);
        correct += b[k];
        if m_classes.last() == Some(&k) {
            continue;
        }
        if i > 0 && !m_classes.is_empty() {
            m_bounds.push(bounds[i - 1]);
        }
        m_classes.push(k);
    }
    let total: f64 = samples.w.iter().sum();
    (total - correct, Rule::Intervals { bounds: m_bounds, classes: m_classes })
}

/// k-nearest neighbours over min-max scaled numerics and 0/1 categorical
/// mismatch.
#[derive(Debug, Clone)]
pub(crate) struct Knn {
    k: usize,
    weighting: KnnWeighting,
    rows: Vec<Vec<f64>>,
    labels: Vec<usize>,
    weights: Vec<f64>,
    numeric: Vec<bool>,
    lo: Vec<f64>,
    span: Vec<f64>,
}

impl Knn {
    pub fn fit(samples: &Samples<'_>, k: usize, weighting: KnnWeighting) -> Self {
        let attrs = samples.data.attributes();
        let d = attrs.len();
        let mut lo = vec![f64::INFINITY; d];
        let mut hi = vec![f64::NEG_INFINITY; d];
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        let mut weights = Vec::new();
        for s in 0..samples.len() {
            if samples.w[s] <= 0.0 {
                continue;
            }
            let r = samples.row(s);
            for j in 0..d {
                lo[j] = lo[j].min(r[j]);
                hi[j] = hi[j].max(r[j]);
            }
            rows.push(r.to_vec());
            labels.push(samples.label(s));
            weights.push(samples.w[s]);
        }
        let span = lo
            .iter()
            .zip(&hi)
            .map(|(l, h)| if h > l { h - l } else { 1.0 })
            .collect();
        Knn {
            k: k.max(1),
            weighting,
            rows,
            labels,
            weights,
            numeric: attrs.iter().map(|a| a.kind.is_numeric()).collect(),
            lo,
            span,
        }
    }

    fn distance(&self, a: &[f64], b: &[f64]) -> f64 {
        let mut d = 0.0;
        for j in 0..a.len() {
            if self.numeric[j] {
                let diff = (a[j] - self.lo[j]) / self.span[j] - (b[j] - self.lo[j]) / self.span[j];
                d += diff * diff;
            } else if a[j] != b[j] {
                d += 1.0;
            }
        }
        d.sqrt()
    }

    pub fn distribution(&self, row: &[f64], n_classes: usize) -> Vec<f64> {
        let mut dists: Vec<(f64, usize)> = self
            .rows
            .iter()
            .enumerate()
            .map(|(i, r)| (self.distance(row, r), i))
            .collect();
        let k = self.k.min(dists.len());
        let cmp = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
        if k < dists.len() {
            dists.select_nth_unstable_by(k - 1, cmp);
            dists.truncate(k);
        }
        let mut votes = vec![0.0; n_classes];
        for &(dist, i) in &dists {
            let w = match self.weighting {
                KnnWeighting::Uniform => 1.0,
                KnnWeighting::InverseDistance => 1.0 / (dist + 1e-6),
            };
            votes[self.labels[i]] += w * self.weights[i];
        }
        normalize(votes)
    }
}

/// Number of equal-width bins used by the discretizing naive Bayes variant.
const NB_BINS: usize = 10;

#[derive(Debug, Clone)]
enum NbAttr {
    Gaussian { mean: Vec<f64>, std: Vec<f64> },
    Binned { lo: f64, width: f64, logp: Vec<Vec<f64>> },
    Levels { logp: Vec<Vec<f64>> },
}

/// Naive Bayes with Gaussian (or binned) numerics and Laplace-smoothed
/// categorical likelihoods.
#[derive(Debug, Clone)]
pub(crate) struct NaiveBayes {
    log_prior: Vec<f64>,
    attrs: Vec<NbAttr>,
}

impl NaiveBayes {
    pub fn fit(samples: &Samples<'_>, discretize: bool, budget: &mut Budget) -> Result<Self, LearnError> {
        let c = samples.n_classes();
        let d = samples.data.n_attributes();
        budget.charge((samples.len() * d.max(1)) as u64)?;
        let cw = samples.class_weights();
        let total: f64 = cw.iter().sum();
        let log_prior = cw.iter().map(|w| ((w + 1.0) / (total + c as f64)).ln()).collect();

        let mut attrs = Vec::with_capacity(d);
        for (a, attr) in samples.data.attributes().iter().enumerate() {
            let col = |s: usize| samples.row(s)[a];
            let model = match &attr.kind {
                AttrKind::Categorical { levels } => {
                    let mut counts = vec![vec![0.0; levels.len()]; c];
                    for s in 0..samples.len() {
                        counts[samples.label(s)][col(s) as usize] += samples.w[s];
                    }
                    NbAttr::Levels { logp: laplace_log(&counts) }
                }
                AttrKind::Numeric => {
                    let (lo, hi) = (0..samples.len())
                        .map(col)
                        .fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), x| (l.min(x), h.max(x)));
                    if discretize {
                        let width = if hi > lo { (hi - lo) / NB_BINS as f64 } else { 1.0 };
                        let mut counts = vec![vec![0.0; NB_BINS]; c];
                        for s in 0..samples.len() {
                            counts[samples.label(s)][bin(col(s), lo, width)] += samples.w[s];
                        }
                        NbAttr::Binned { lo, width, logp: laplace_log(&counts) }
                    } else {
                        let floor = ((hi - lo) * 1e-3).max(1e-6);
                        let mut sum = vec![0.0; c];
                        for s in 0..samples.len() {
                            sum[samples.label(s)] += samples.w[s] * col(s);
                        }
                        let mean: Vec<f64> =
                            (0..c).map(|k| if cw[k] > 0.0 { sum[k] / cw[k] } else { 0.0 }).collect();
                        let mut var = vec![0.0; c];
                        for s in 0..samples.len() {
                            let k = samples.label(s);
                            var[k] += samples.w[s] * (col(s) - mean[k]).powi(2);
                        }
                        let std = (0..c)
                            .map(|k| if cw[k] > 0.0 { (var[k] / cw[k]).sqrt().max(floor) } else { floor })
                            .collect();
                        NbAttr::Gaussian { mean, std }
                    }
                }
            };
            attrs.push(model);
        }
        Ok(NaiveBayes { log_prior, attrs })
    }

    pub fn distribution(&self, row: &[f64]) -> Vec<f64> {
        let mut logp = self.log_prior.clone();
        for (a, model) in self.attrs.iter().enumerate() {
            let x = row[a];
            for (k, lp) in logp.iter_mut().enumerate() {
                *lp += match model {
                    NbAttr::Gaussian { mean, std } => {
                        let z = (x - mean[k]) / std[k];
                        -0.5 * z * z - std[k].ln()
                    }
                    NbAttr::Binned { lo, width, logp } => logp[k][bin(x, *lo, *width)],
                    NbAttr::Levels { logp } => logp[k].get(x as usize).copied().unwrap_or(f64::MIN),
                };
            }
        }
        softmax(&logp)
    }
}

fn bin(x: f64, lo: f64, width: f64) -> usize {
    (((x - lo) / width).floor().max(0.0) as usize).min(NB_BINS - 1)
}

fn laplace_log(counts: &[Vec<f64>]) -> Vec<Vec<f64>> {
    counts
        .iter()
        .map(|row| {
            let total: f64 = row.iter().sum::<f64>() + row.len() as f64;
            row.iter().map(|x| ((x + 1.0) / total).ln()).collect()
        })
        .collect()
}

fn softmax(logits: &[f64]) -> Vec<f64> {
    let m = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    normalize(logits.iter().map(|l| (l - m).exp()).collect())
}

/// Multinomial logistic regression trained by plain SGD on standardized
/// numerics and one-hot categoricals.
#[derive(Debug, Clone)]
pub(crate) struct Logistic {
    /// Per attribute: Some((mean, std)) for numerics, or the level count.
    encoders: Vec<Result<(f64, f64), usize>>,
    /// Row-major `n_classes x (dim + 1)`, bias last.
    weights: Vec<Vec<f64>>,
}

impl Logistic {
    pub fn fit<R: Rng + ?Sized>(
        samples: &Samples<'_>,
        learning_rate: f64,
        epochs: usize,
        l2: f64,
        budget: &mut Budget,
        rng: &mut R,
    ) -> Result<Self, LearnError> {
        let c = samples.n_classes();
        let total_w: f64 = samples.w.iter().sum();
        let encoders: Vec<Result<(f64, f64), usize>> = samples
            .data
            .attributes()
            .iter()
            .enumerate()
            .map(|(a, attr)| match &attr.kind {
                AttrKind::Categorical { levels } => Err(levels.len()),
                AttrKind::Numeric => {
                    let mean = (0..samples.len()).map(|s| samples.w[s] * samples.row(s)[a]).sum::<f64>() / total_w;
                    let var = (0..samples.len())
                        .map(|s| samples.w[s] * (samples.row(s)[a] - mean).powi(2))
                        .sum::<f64>()
                        / total_w;
                    let std = var.sqrt();
                    Ok((mean, if std > 1e-12 { std } else { 1.0 }))
                }
            })
            .collect();
        let mut model = Logistic { encoders, weights: Vec::new() };
        let dim = model.dim();
        model.weights = vec![vec![0.0; dim + 1]; c];

        let encoded: Vec<Vec<f64>> = (0..samples.len()).map(|s| model.encode(samples.row(s))).collect();
        let scale = samples.len() as f64 / total_w;
        let mut order: Vec<usize> = (0..samples.len()).collect();
        for _ in 0..epochs {
            budget.charge(samples.len() as u64)?;
            order.shuffle(rng);
            for &s in &order {
                let x = &encoded[s];
                let p = model.probs(x);
                let y = samples.label(s);
                let w = samples.w[s] * scale;
                for (k, wk) in model.weights.iter_mut().enumerate() {
                    let g = (p[k] - if k == y { 1.0 } else { 0.0 }) * w;
                    for j in 0..dim {
                        wk[j] -= learning_rate * (g * x[j] + l2 * wk[j]);
                    }
                    wk[dim] -= learning_rate * g;
                    for v in wk.iter_mut() {
                        *v = v.clamp(-1e3, 1e3);
                    }
                }
            }
        }
        Ok(model)
    }

    fn dim(&self) -> usize {
        self.encoders.iter().map(|e| e.map_or_else(|l| l, |_| 1)).sum()
    }

    fn encode(&self, row: &[f64]) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.dim());
        for (x, e) in row.iter().zip(&self.encoders) {
            match e {
                Ok((m, s)) => out.push((x - m) / s),
                Err(levels) => {
                    let l = *x as usize;
                    out.extend((0..*levels).map(|i| if i == l { 1.0 } else { 0.0 }));
                }
            }
        }
        out
    }

    fn probs(&self, x: &[f64]) -> Vec<f64> {
        let dim = x.len();
        let logits: Vec<f64> = self
            .weights
            .iter()
            .map(|wk| wk[..dim].iter().zip(x).map(|(a, b)| a * b).sum::<f64>() + wk[dim])
            .collect();
        softmax(&logits)
    }

    pub fn distribution(&self, row: &[f64]) -> Vec<f64> {
        self.probs(&self.encode(row))
    }
}
