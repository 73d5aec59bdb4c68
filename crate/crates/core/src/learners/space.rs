//! The conditional learner space and its decoding into a [`Pipeline`].
//!
//! Root selectors `is_base` and `feat_sel` pick between a single base learner
//! and a meta/ensemble class, and toggle feature selection. Every learner slot
//! (`base`, `meta_base`, `base_1`..`base_5`) carries its own copy of the base
//! learners' hyperparameters, named `{slot}.{learner}.{param}`.

use std::sync::OnceLock;

use super::{
    FeatSelConfig, FeatureEvaluator, FeatureSearch, KnnWeighting, LearnError, LearnerId,
    LearnerSpec, Pipeline, SplitCriterion,
};
use crate::paramspace::{validate_space, Config, ParamDef, ParamSpace, Value};

pub const BASE_LEARNERS: [LearnerId; 8] = [
    LearnerId::ZeroR,
    LearnerId::OneR,
    LearnerId::DecisionStump,
    LearnerId::Knn,
    LearnerId::NaiveBayes,
    LearnerId::LogisticSgd,
    LearnerId::CartTree,
    LearnerId::RandomForest,
];

pub const MAX_VOTING_BASES: usize = 5;

/// Learner selector slots, in the order they appear in the space.
pub const BASE_SLOTS: [&str; 7] = ["base", "meta_base", "base_1", "base_2", "base_3", "base_4", "base_5"];

const ROOT: &str = "is_base";

fn base_names() -> Vec<&'static str> {
    BASE_LEARNERS.iter().map(|l| l.name()).collect()
}

fn slot_params(slot: &str) -> Vec<ParamDef> {
    let p = |learner: &str, name: &str| format!("{slot}.{learner}.{name}");
    let on = |def: ParamDef, learner: &str| def.when(slot, &[learner]);
    vec![
        on(ParamDef::integer(&p("one_r", "min_bucket"), 1, 32, 6), "one_r"),
        on(ParamDef::integer(&p("knn", "k"), 1, 51, 1).log(), "knn"),
        on(ParamDef::categorical(&p("knn", "weighting"), &["uniform", "inverse"], "uniform"), "knn"),
        on(ParamDef::categorical(&p("naive_bayes", "discretize"), &["false", "true"], "false"), "naive_bayes"),
        on(ParamDef::real(&p("logistic_sgd", "learning_rate"), 1e-4, 1.0, 0.1).log(), "logistic_sgd"),
        on(ParamDef::integer(&p("logistic_sgd", "epochs"), 1, 50, 10), "logistic_sgd"),
        on(ParamDef::real(&p("logistic_sgd", "l2"), 1e-6, 1e-1, 1e-4).log(), "logistic_sgd"),
        on(ParamDef::integer(&p("cart_tree", "max_depth"), 1, 20, 10), "cart_tree"),
        on(ParamDef::integer(&p("cart_tree", "min_leaf"), 1, 20, 2), "cart_tree"),
        on(ParamDef::categorical(&p("cart_tree", "criterion"), &["gini", "entropy"], "gini"), "cart_tree"),
        on(ParamDef::integer(&p("random_forest", "trees"), 2, 128, 10).log(), "random_forest"),
        on(ParamDef::real(&p("random_forest", "feature_fraction"), 0.1, 1.0, 0.5), "random_forest"),
        on(ParamDef::integer(&p("random_forest", "max_depth"), 1, 20, 20), "random_forest"),
    ]
}

fn definitions() -> Vec<ParamDef> {
    let bases = base_names();
    let mut defs = vec![
        ParamDef::categorical(ROOT, &["true", "false"], "true"),
        ParamDef::categorical("feat_sel", &["false", "true"], "false"),
        ParamDef::categorical("base", &bases, "cart_tree").when(ROOT, &["true"]),
        ParamDef::categorical("class", &["adaboost_m1", "bagging", "voting"], "adaboost_m1").when(ROOT, &["false"]),
        ParamDef::categorical("meta_base", &bases, "cart_tree").when("class", &["adaboost_m1", "bagging"]),
        ParamDef::integer("adaboost_m1.iterations", 2, 64, 10).when("class", &["adaboost_m1"]),
        ParamDef::integer("bagging.iterations", 2, 64, 10).when("class", &["bagging"]),
        ParamDef::real("bagging.bag_fraction", 0.1, 1.0, 1.0).when("class", &["bagging"]),
        ParamDef::categorical("num_classes", &["1", "2", "3", "4", "5"], "1").when("class", &["voting"]),
    ];
    let counts = ["1", "2", "3", "4", "5"];
    for i in 1..=MAX_VOTING_BASES {
        let slot = ParamDef::categorical(&format!("base_{i}"), &bases, "cart_tree");
        defs.push(if i == 1 { slot.when("class", &["voting"]) } else { slot.when("num_classes", &counts[i - 1..]) });
    }
    for slot in BASE_SLOTS {
        defs.extend(slot_params(slot));
    }
    defs.extend([
        ParamDef::categorical("feat_search", &["ranker", "greedy_forward"], "ranker").when("feat_sel", &["true"]),
        ParamDef::categorical("feat_eval", &["info_gain", "pearson_correlation"], "info_gain").when("feat_sel", &["true"]),
        ParamDef::real("feat.ranker_keep_fraction", 0.1, 1.0, 0.5).when("feat_search", &["ranker"]),
        ParamDef::real("feat.greedy_min_gain", 1e-4, 1e-1, 1e-3).log().when("feat_search", &["greedy_forward"]),
    ]);
    defs
}

/// Builds the full learner space.
pub fn space_of_learners() -> ParamSpace {
    validate_space(&definitions(), ROOT).expect("built-in learner space is valid")
}

/// Shared instance of [`space_of_learners`].
pub fn learner_space() -> &'static ParamSpace {
    static SPACE: OnceLock<ParamSpace> = OnceLock::new();
    SPACE.get_or_init(space_of_learners)
}

struct Reader<'a> {
    space: &'a ParamSpace,
    config: &'a Config,
}

impl Reader<'_> {
    fn get(&self, name: &str) -> Result<Value, LearnError> {
        self.space
            .value(self.config, name)
            .ok_or_else(|| LearnError::InvalidConfig(format!("missing active parameter {name}")))
    }

    fn level(&self, name: &str) -> Result<&str, LearnError> {
        self.get(name)?;
        self.space
            .level_name(self.config, name)
            .ok_or_else(|| LearnError::InvalidConfig(format!("{name} is not categorical")))
    }

    fn flag(&self, name: &str) -> Result<bool, LearnError> {
        Ok(self.level(name)? == "true")
    }

    fn int(&self, name: &str) -> Result<usize, LearnError> {
        Ok(self.get(name)?.as_f64().max(0.0) as usize)
    }

    fn real(&self, name: &str) -> Result<f64, LearnError> {
        Ok(self.get(name)?.as_f64())
    }

    fn base(&self, slot: &str) -> Result<LearnerSpec, LearnError> {
        let name = self.level(slot)?;
        let id = LearnerId::from_name(name)
            .ok_or_else(|| LearnError::InvalidConfig(format!("unknown learner {name}")))?;
        let p = |param: &str| format!("{slot}.{name}.{param}");
        Ok(match id {
            LearnerId::ZeroR => LearnerSpec::ZeroR,
            LearnerId::OneR => LearnerSpec::OneR { min_bucket: self.int(&p("min_bucket"))? },
            LearnerId::DecisionStump => LearnerSpec::DecisionStump,
            LearnerId::Knn => LearnerSpec::Knn {
                k: self.int(&p("k"))?,
                weighting: match self.level(&p("weighting"))? {
                    "inverse" => KnnWeighting::InverseDistance,
                    _ => KnnWeighting::Uniform,
                },
            },
            LearnerId::NaiveBayes => LearnerSpec::NaiveBayes { discretize: self.flag(&p("discretize"))? },
            LearnerId::LogisticSgd => LearnerSpec::LogisticSgd {
                learning_rate: self.real(&p("learning_rate"))?,
                epochs: self.int(&p("epochs"))?,
                l2: self.real(&p("l2"))?,
            },
            LearnerId::CartTree => LearnerSpec::CartTree {
                max_depth: self.int(&p("max_depth"))?,
                min_leaf: self.int(&p("min_leaf"))?,
                criterion: match self.level(&p("criterion"))? {
                    "entropy" => SplitCriterion::Entropy,
                    _ => SplitCriterion::Gini,
                },
            },
            LearnerId::RandomForest => LearnerSpec::RandomForest {
                trees: self.int(&p("trees"))?,
                feature_fraction: self.real(&p("feature_fraction"))?,
                max_depth: self.int(&p("max_depth"))?,
            },
            other => return Err(LearnError::InvalidConfig(format!("{} cannot fill slot {slot}", other.name()))),
        })
    }
}

/// Decodes a learner-space config into the pipeline it describes.
pub fn decode(space: &ParamSpace, config: &Config) -> Result<Pipeline, LearnError> {
    space.check(config).map_err(|e| LearnError::InvalidConfig(e.to_string()))?;
    let r = Reader { space, config };
    let learner = if r.flag(ROOT)? {
        r.base("base")?
    } else {
        match r.level("class")? {
            "adaboost_m1" => LearnerSpec::AdaboostM1 {
                iterations: r.int("adaboost_m1.iterations")?,
                base: Box::new(r.base("meta_base")?),
            },
            "bagging" => LearnerSpec::Bagging {
                iterations: r.int("bagging.iterations")?,
                bag_fraction: r.real("bagging.bag_fraction")?,
                base: Box::new(r.base("meta_base")?),
            },
            _ => {
                let n: usize = r.level("num_classes")?.parse().unwrap_or(1);
                let bases = (1..=n).map(|i| r.base(&format!("base_{i}"))).collect::<Result<_, _>>()?;
                LearnerSpec::Voting { bases }
            }
        }
    };
    let feat_sel = if r.flag("feat_sel")? {
        let search = match r.level("feat_search")? {
            "greedy_forward" => FeatureSearch::GreedyForward,
            _ => FeatureSearch::Ranker,
        };
        let evaluator = match r.level("feat_eval")? {
            "pearson_correlation" => FeatureEvaluator::PearsonCorrelation,
            _ => FeatureEvaluator::InfoGain,
        };
        let (keep_fraction, min_gain) = match search {
            FeatureSearch::Ranker => (r.real("feat.ranker_keep_fraction")?, 0.0),
            FeatureSearch::GreedyForward => (1.0, r.real("feat.greedy_min_gain")?),
        };
        Some(FeatSelConfig { search, evaluator, keep_fraction, min_gain })
    } else {
        None
    };
    Ok(Pipeline { feat_sel, learner })
}

/// The pipeline of the space's all-defaults config.
pub fn default_pipeline() -> Pipeline {
    let space = learner_space();
    decode(space, &space.default_config()).expect("default config decodes")
}

/// One default-hyperparameter config per roster entry, in roster order:
/// the base learners, then the meta learners and voting over a cart_tree base.
pub fn ex_def_roster(space: &ParamSpace) -> Vec<(LearnerId, Config)> {
    let with_defaults = |pairs: &[(&str, &str)]| {
        let mut c = space.config_from_pairs(pairs).expect("roster pairs are in the space");
        fill_defaults(space, &mut c);
        c
    };
    let mut out: Vec<(LearnerId, Config)> = BASE_LEARNERS
        .iter()
        .map(|l| (*l, with_defaults(&[("is_base", "true"), ("feat_sel", "false"), ("base", l.name())])))
        .collect();
    for (id, class) in [(LearnerId::AdaboostM1, "adaboost_m1"), (LearnerId::Bagging, "bagging")] {
        out.push((
            id,
            with_defaults(&[("is_base", "false"), ("feat_sel", "false"), ("class", class), ("meta_base", "cart_tree")]),
        ));
    }
    out.push((
        LearnerId::Voting,
        with_defaults(&[
            ("is_base", "false"),
            ("feat_sel", "false"),
            ("class", "voting"),
            ("num_classes", "1"),
            ("base_1", "cart_tree"),
        ]),
    ));
    out
}

/// Assigns defaults to active unassigned parameters and clears inactive ones.
pub(crate) fn fill_defaults(space: &ParamSpace, config: &mut Config) {
    for &i in space.topological_order() {
        let active = space.active_mask(config)[i];
        if !active {
            config.set(i, None);
        } else if config.get(i).is_none() {
            config.set(i, Some(space.params()[i].default));
        }
    }
}
