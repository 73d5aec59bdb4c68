use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::bootstrap::{bootstrap_medians, lower_median};
use super::{ExperimentMeta, RunRecord};
use crate::paramspace::{Config, ParamSpace};

/// How often each classifier was the final incumbent.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Census {
    pub total: usize,
    pub learners: BTreeMap<String, usize>,
    /// Base learner inside AdaBoost / bagging incumbents.
    pub meta_bases: BTreeMap<String, usize>,
    /// Incumbents with feature selection switched on.
    pub feat_sel: usize,
}

impl Census {
    pub fn fraction(&self, learner: &str) -> f64 {
        self.learners.get(learner).copied().unwrap_or(0) as f64 / self.total.max(1) as f64
    }

    /// Learners by descending count, ties by name.
    pub fn ranked(&self) -> Vec<(&str, usize)> {
        let mut v: Vec<(&str, usize)> = self.learners.iter().map(|(k, &c)| (k.as_str(), c)).collect();
        v.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(b.0)));
        v
    }
}

/// The classifier a config selects: the base learner or the meta/ensemble
/// class in the learner space, the root level elsewhere.
pub fn learner_label(space: &ParamSpace, config: &Config) -> String {
    match space.level_name(config, "is_base") {
        Some("true") => space.level_name(config, "base"),
        Some(_) => space.level_name(config, "class"),
        None => {
            let root = &space.params()[space.root()].name;
            space.level_name(config, root)
        }
    }
    .unwrap_or("?")
    .to_string()
}

pub fn classifier_census(space: &ParamSpace, incumbents: &[&Config]) -> Census {
    let mut c = Census { total: incumbents.len(), ..Default::default() };
    for config in incumbents {
        *c.learners.entry(learner_label(space, config)).or_default() += 1;
        if let Some(b) = space.level_name(config, "meta_base") {
            *c.meta_bases.entry(b.to_string()).or_default() += 1;
        }
        if space.level_name(config, "feat_sel") == Some("true") {
            c.feat_sel += 1;
        }
    }
    c
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodReport {
    pub method: String,
    pub seeds: Vec<u64>,
    pub evaluations: Vec<usize>,
    pub cv_losses: Vec<f64>,
    pub test_losses: Vec<f64>,
    /// Lower medians of the bootstrap batch winners.
    pub median_cv_loss: f64,
    pub median_test_loss: f64,
    pub spearman: Vec<Option<f64>>,
    pub incumbents: Vec<String>,
    pub census: Census,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub experiment: ExperimentMeta,
    pub methods: Vec<MethodReport>,
}

/// Reduces run records (in any order) to the report; methods appear in the
/// order of `meta.methods`, runs by seed.
pub fn build_report(space: &ParamSpace, meta: &ExperimentMeta, records: &[RunRecord]) -> Report {
    let methods = meta
        .methods
        .iter()
        .filter_map(|m| {
            let mut runs: Vec<&RunRecord> = records.iter().filter(|r| r.result.method == *m).collect();
            if runs.is_empty() {
                return None;
            }
            runs.sort_by_key(|r| r.result.seed);
            let seeds: Vec<u64> = runs.iter().map(|r| r.result.seed).collect();
            let cv_losses: Vec<f64> = runs.iter().map(|r| r.result.final_cv_loss()).collect();
            let test_losses: Vec<f64> = runs.iter().map(|r| r.test_loss).collect();
            let medians = bootstrap_medians(
                &cv_losses,
                &test_losses,
                &seeds,
                meta.batch,
                meta.bootstrap_samples,
                meta.seed,
            );
            let incumbents: Vec<&Config> = runs.iter().map(|r| r.result.incumbent_config()).collect();
            Some(MethodReport {
                method: m.clone(),
                evaluations: runs.iter().map(|r| r.result.evaluations()).collect(),
                median_cv_loss: medians.cv,
                median_test_loss: medians.test,
                spearman: runs.iter().map(|r| r.overfit.rho).collect(),
                incumbents: incumbents.iter().map(|c| space.describe(c)).collect(),
                census: classifier_census(space, &incumbents),
                seeds,
                cv_losses,
                test_losses,
            })
        })
        .collect();
    Report { experiment: meta.clone(), methods }
}

fn pct(x: f64) -> String {
    format!("{:.2}", 100.0 * x)
}

impl Report {
    pub fn to_markdown(&self) -> String {
        let e = &self.experiment;
        let mut s = String::new();
        let _ = writeln!(s, "# CASH experiment: {}\n", e.dataset);
        let _ = writeln!(
            s,
            "{} training / {} validation / {} test instances; {}-fold CV; budget {} fold evaluations; \
             best of {} runs per batch over {} bootstrap samples.\n",
            e.n_train, e.n_validation, e.n_test, e.k, e.budget, e.batch, e.bootstrap_samples
        );
        let _ = writeln!(s, "| Method | Runs | CV error % | Test error % | Spearman rho (median) | Most chosen |");
        let _ = writeln!(s, "|---|---|---|---|---|---|");
        for m in &self.methods {
            let rhos: Vec<f64> = m.spearman.iter().flatten().copied().collect();
            let rho = lower_median(&rhos).map_or("n/a".to_string(), |r| format!("{r:.2}"));
            let top = m
                .census
                .ranked()
                .first()
                .map_or("n/a".to_string(), |(l, c)| format!("{l} ({:.0}%)", 100.0 * *c as f64 / m.census.total as f64));
            let _ = writeln!(
                s,
                "| {} | {} | {} | {} | {} | {} |",
                m.method,
                m.seeds.len(),
                pct(m.median_cv_loss),
                pct(m.median_test_loss),
                rho,
                top
            );
        }
        let _ = writeln!(s, "\n## Chosen classifiers");
        for m in &self.methods {
            let _ = writeln!(s, "\n### {}\n\n| Learner | Share |\n|---|---|", m.method);
            for (l, c) in m.census.ranked() {
                let _ = writeln!(s, "| {l} | {:.0}% |", 100.0 * c as f64 / m.census.total as f64);
            }
            if m.census.feat_sel > 0 {
                let _ = writeln!(s, "\nFeature selection in {} of {} incumbents.", m.census.feat_sel, m.census.total);
            }
        }
        s
    }
}
