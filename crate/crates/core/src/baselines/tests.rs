use super::*;
use crate::dataspace::{numeric_dataset, stratified_folds};
use crate::evaluator::{CvObjective, FoldBudget, FoldOutcome};
use crate::learners::rng_for;
use crate::learners::learner_space;
use crate::paramspace::{validate_space, ParamDef};
use crate::smbo::run_smbo;
use crate::synthetic::SyntheticCash;

#[test]
fn grid_value_fixtures() {
    let s = validate_space(
        &[
            ParamDef::categorical("a", &["x", "y", "z"], "x"),
            ParamDef::real("r", 0.0, 1.0, 0.5),
            ParamDef::integer("i", 1, 9, 3),
            ParamDef::integer("k", 1, 51, 1).log(),
            ParamDef::real("lr", 1e-4, 1.0, 0.1).log(),
        ],
        "a",
    )
    .unwrap();
    let p = |n: &str| s.param(n).unwrap();
    assert_eq!(grid_values(p("a"), 10), vec![Value::Level(0), Value::Level(1), Value::Level(2)]);
    let r = grid_values(p("r"), 10);
    assert_eq!(r.len(), 10);
    for (j, v) in r.iter().enumerate() {
        assert!((v.as_f64() - j as f64 / 9.0).abs() < 1e-15);
    }
    assert_eq!(grid_values(p("i"), 10), (1..=9).map(Value::Int).collect::<Vec<_>>());
    let k: Vec<i64> = grid_values(p("k"), 10).iter().map(|v| v.as_f64() as i64).collect();
    assert_eq!((k[0], *k.last().unwrap()), (1, 51));
    assert!(k.len() <= 10 && k.windows(2).all(|w| w[0] < w[1]));
    let lr = grid_values(p("lr"), 10);
    for (j, v) in lr.iter().enumerate() {
        let want = 10f64.powf(-4.0 + 4.0 * j as f64 / 9.0);
        assert!((v.as_f64() / want - 1.0).abs() < 1e-12);
    }
}

#[test]
fn learner_grid_points_are_valid_configs() {
    let space = learner_space();
    let grid = GridSpec::for_learners(space);
    assert_eq!(grid.grids.len(), 8);
    let mut seen = std::collections::HashSet::new();
    for c in grid.iter() {
        space.check(&c).unwrap();
        assert_eq!(space.config_from_json(&space.config_to_json(&c)).unwrap(), c);
        assert!(seen.insert(c));
    }
    assert_eq!(seen.len() as u64, grid.size());
    for g in &grid.grids {
        assert!(g.axes.iter().all(|(i, _)| space.params()[*i].name.starts_with(&format!("base.{}.", g.name))));
    }
}

#[test]
fn grid_union_is_sampled_uniformly() {
    let space = learner_space();
    let grid = GridSpec::for_learners(space);
    let mut rng = rng_for(3, 0);
    let n = 20_000;
    let big = grid.grids.iter().position(|g| g.name == "random_forest").unwrap();
    let hits = (0..n)
        .filter(|_| {
            let c = grid.sample(&mut rng);
            space.level_name(&c, "base") == Some("random_forest")
        })
        .count();
    let p = grid.grids[big].size() as f64 / grid.size() as f64;
    let sd = (p * (1.0 - p) / n as f64).sqrt();
    assert!((hits as f64 / n as f64 - p).abs() < 4.0 * sd);
}

/// Fixed per-level losses on a one-parameter space.
struct Table {
    space: ParamSpace,
    losses: Vec<Vec<f64>>,
}

impl Table {
    fn new(losses: Vec<Vec<f64>>) -> Self {
        let names: Vec<String> = (0..losses.len()).map(|i| format!("c{i}")).collect();
        let refs: Vec<&str> = names.iter().map(String::as_str).collect();
        let space = validate_space(&[ParamDef::categorical("c", &refs, "c0")], "c").unwrap();
        Self { space, losses }
    }

    fn roster(&self) -> Vec<(String, Config)> {
        (0..self.losses.len())
            .map(|i| (format!("c{i}"), self.space.config_from_pairs(&[("c", &format!("c{i}"))]).unwrap()))
            .collect()
    }
}

impl Objective for Table {
    fn n_folds(&self) -> usize {
        self.losses[0].len()
    }

    fn evaluate(&self, config: &Config, fold: usize) -> FoldOutcome {
        let i = config.get(0).unwrap().as_level().unwrap();
        FoldOutcome { loss: self.losses[i][fold], budget_exhausted: false, wall_time_ms: 0.0 }
    }
}

#[test]
fn ex_def_ties_go_to_the_earlier_entry() {
    let t = Table::new(vec![vec![0.5, 0.5], vec![0.25, 0.5], vec![0.5, 0.25], vec![0.375, 0.5]]);
    let r = ex_def(&t.roster(), &t, 0);
    assert_eq!(r.best_name(), "c1");
    assert_eq!(r.result.incumbent_loss, 0.375);
    assert_eq!(r.result.evaluations(), 8);
    let min = r.table.iter().map(|e| e.1).fold(f64::INFINITY, f64::min);
    assert_eq!(r.table[r.best].1, min);
}

fn majority_data() -> crate::dataspace::Dataset {
    let mut rng = rng_for(11, 0);
    let rows: Vec<Vec<f64>> = (0..60).map(|_| (0..3).map(|_| rng.random::<f64>()).collect()).collect();
    let labels: Vec<usize> = (0..60).map(|i| usize::from(i % 10 == 0)).collect();
    numeric_dataset(rows, labels).unwrap()
}

#[test]
fn ex_def_on_a_degenerate_dataset_returns_the_table_minimum() {
    let space = learner_space();
    let data = majority_data();
    let plan = stratified_folds(&data, 3, 1).unwrap();
    let obj = CvObjective { space, data: &data, plan: &plan, budget: FoldBudget::default(), seed: 2 };
    let r = ex_def(&learner_roster(space), &obj, 0);
    assert_eq!(r.table.len(), 11);
    assert_eq!(r.result.evaluations(), 33);
    let min = r.table.iter().map(|e| e.1).fold(f64::INFINITY, f64::min);
    assert_eq!(r.result.incumbent_loss, min);
    assert_eq!(r.table[0].0, "zero_r");
    // zero_r is first and never worse than the minority rate
    assert!((r.table[0].1 - 0.1).abs() < 1e-12);
    if min == r.table[0].1 {
        assert_eq!(r.best_name(), "zero_r");
    }

    let mut grid = RandomGrid::for_learners(space);
    let g = run_smbo(&mut grid, space, &obj, 33, 5, None).unwrap();
    assert_eq!(g.incumbent_config(), r.result.incumbent_config());
    assert_eq!(g.final_cv_loss(), r.result.final_cv_loss());
}

fn quad_grid(bench: &SyntheticCash) -> RandomGrid {
    let s = bench.space();
    let anchors = vec![
        ("const".to_string(), s.config_from_pairs(&[("algo", "const")]).unwrap()),
        ("quad".to_string(), s.default_config_with("algo", "quad")),
    ];
    let grid = GridSpec::from_anchors(s, &anchors, |p| p.name.starts_with("quad."));
    RandomGrid::new(grid, anchors.into_iter().map(|a| a.1).collect())
}

trait WithLevel {
    fn default_config_with(&self, name: &str, level: &str) -> Config;
}

impl WithLevel for ParamSpace {
    fn default_config_with(&self, name: &str, level: &str) -> Config {
        let i = self.index_of(name).unwrap();
        let l = self.params()[i].levels().unwrap().iter().position(|x| x == level).unwrap();
        self.build_config(|j, p| if j == i { Value::Level(l) } else { p.default })
    }
}

#[test]
fn random_grid_is_deterministic_and_monotone_in_budget() {
    let bench = SyntheticCash::new(3);
    let a = run_smbo(&mut quad_grid(&bench), bench.space(), &bench, 60, 8, None).unwrap();
    let b = run_smbo(&mut quad_grid(&bench), bench.space(), &bench, 60, 8, None).unwrap();
    assert_eq!(a, b);
    let mut last = f64::INFINITY;
    for budget in [6, 15, 30, 60, 150] {
        let r = run_smbo(&mut quad_grid(&bench), bench.space(), &bench, budget, 8, None).unwrap();
        assert!(r.incumbent_loss <= last);
        last = r.incumbent_loss;
    }
}

#[test]
fn single_point_grid_returns_it() {
    let bench = SyntheticCash::new(3);
    let s = bench.space();
    let only = s.config_from_pairs(&[("algo", "const")]).unwrap();
    let grid = GridSpec::from_anchors(s, &[("const".into(), only.clone())], |_| false);
    assert_eq!(grid.size(), 1);
    let r = run_smbo(&mut RandomGrid::new(grid, vec![]), s, &bench, 30, 1, None).unwrap();
    assert_eq!(r.incumbent_config(), &only);
    assert_eq!(r.evaluations(), 3);
}
