use super::*;
use crate::learners::rng_for;
use crate::paramspace::{validate_space, ParamDef};
use crate::smbo::run_smbo;
use crate::synthetic::SyntheticCash;

/// Adaptive Simpson integration to absolute tolerance `eps`.
fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, eps: f64) -> f64 {
    fn simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
        let m = (a + b) / 2.0;
        let fm = f(m);
        ((b - a) / 6.0 * (f(a) + 4.0 * fm + f(b)), fm)
    }
    fn rec(f: &dyn Fn(f64) -> f64, a: f64, b: f64, eps: f64, whole: f64, depth: u32) -> f64 {
        let m = (a + b) / 2.0;
        let (left, _) = simpson(f, a, m);
        let (right, _) = simpson(f, m, b);
        if depth == 0 || (left + right - whole).abs() <= 15.0 * eps {
            return left + right + (left + right - whole) / 15.0;
        }
        rec(f, a, m, eps / 2.0, left, depth - 1) + rec(f, m, b, eps / 2.0, right, depth - 1)
    }
    let (whole, _) = simpson(f, a, b);
    rec(f, a, b, eps, whole, 50)
}

fn ids_losses(losses: &[f64]) -> Vec<(usize, f64)> {
    losses.iter().copied().enumerate().collect()
}

#[test]
fn split_fixtures() {
    let tenths: Vec<f64> = (1..=10).map(|i| i as f64 / 10.0).collect();
    let s = split_losses(&ids_losses(&tenths), 0.15).unwrap();
    assert_eq!(s.good, vec![0, 1]);
    assert_eq!(s.bad.len(), 8);
    assert_eq!(s.threshold, 0.3);

    let s = split_losses(&ids_losses(&[0.4; 6]), 0.15).unwrap();
    assert!(s.good.is_empty() && s.bad.len() == 6);

    let s = split_losses(&ids_losses(&[0.2, 0.8]), 0.5).unwrap();
    assert_eq!((s.good, s.bad), (vec![0], vec![1]));

    assert_eq!(split_losses(&ids_losses(&[0.2]), 0.5), Err(TpeError::TooFewObservations(1)));
    assert_eq!(split_losses(&ids_losses(&[0.2, 0.3]), 1.0), Err(TpeError::InvalidGamma(1.0)));
}

#[test]
fn quantile_index_counts_good_configs() {
    // distinct losses: exactly ceil(gamma * n) fall strictly below the threshold
    for n in 2..40 {
        for gamma in [0.05, 0.15, 0.25, 0.5, 0.9] {
            let losses: Vec<f64> = (0..n).map(|i| ((n - i) * (i + 3)) as f64 + 0.001 * i as f64).collect();
            let s = split_losses(&ids_losses(&losses), gamma).unwrap();
            let want = ((gamma * n as f64).ceil() as usize).min(n - 1);
            assert_eq!(s.good.len(), want, "n {n} gamma {gamma}");
        }
    }
}

#[test]
fn bandwidth_is_the_larger_gap() {
    let p = Parzen::new(0.0, 1.0, &[0.9, 0.2, 0.5]);
    assert_eq!(p.centers(), &[0.2, 0.5, 0.9]);
    let b = p.bandwidths();
    assert!((b[1] - 0.4).abs() < 1e-15);
    assert!((b[0] - 0.3).abs() < 1e-15);
    assert!((b[2] - 0.4).abs() < 1e-15);
    // duplicates fall back to the floor
    let p = Parzen::new(0.0, 1.0, &[0.5, 0.5, 0.5]);
    assert_eq!(p.bandwidths(), &[0.5, 0.25, 0.5]);
}

#[test]
fn smoothed_counts() {
    let c = Categorical::new(3, &[0, 0, 1]);
    for (p, want) in c.probs.iter().zip([3.0, 2.0, 1.0]) {
        assert!((p - want / 6.0).abs() < 1e-15);
    }
    assert_eq!(Categorical::new(2, &[]).probs, vec![0.5, 0.5]);
}

fn two_level_space() -> ParamSpace {
    validate_space(
        &[
            ParamDef::categorical("a", &["on", "off"], "on"),
            ParamDef::real("b", 0.0, 1.0, 0.5).when("a", &["on"]),
            ParamDef::real("c", 0.0, 1.0, 0.5),
        ],
        "a",
    )
    .unwrap()
}

#[test]
fn inactive_parameters_are_not_observed() {
    let s = two_level_space();
    let on = s.config_from_pairs(&[("a", "on"), ("b", "0.3"), ("c", "0.1")]).unwrap();
    let off = s.config_from_pairs(&[("a", "off"), ("c", "0.7")]).unwrap();
    let one = build_parzen(&[&on], &s);
    let both = build_parzen(&[&on, &off], &s);
    assert_eq!(one.nodes[1].observations, 1);
    assert_eq!(both.nodes[1].observations, 1);
    assert_eq!(both.nodes[2].observations, 2);
    assert_eq!(both.nodes[1], one.nodes[1]);
}

#[test]
fn density_fixtures() {
    let s = two_level_space();
    let empty = build_parzen(&[], &s);
    let off = s.config_from_pairs(&[("a", "off"), ("c", "0.7")]).unwrap();
    // discrete 0.5 times the uniform prior density 1
    assert!((empty.density(&s, &off) - 0.5).abs() < 1e-15);
    let Estimator::Continuous(p) = &empty.nodes[2].estimator else { panic!() };
    for x in [0.0, 0.3, 1.0] {
        assert_eq!(p.pdf(x), 1.0);
    }

    let on = s.config_from_pairs(&[("a", "on"), ("b", "0.3"), ("c", "0.1")]).unwrap();
    let t = build_parzen(&[&on, &on, &off], &s);
    let pa = Categorical::new(2, &[0, 0, 1]).probs[0];
    let pb = Parzen::new(0.0, 1.0, &[0.3, 0.3]).pdf(0.3);
    let pc = Parzen::new(0.0, 1.0, &[0.1, 0.1, 0.7]).pdf(0.1);
    let d = t.density(&s, &on);
    assert!((d - pa * pb * pc).abs() < 1e-12 * d);
}

#[test]
fn ei_score_fixtures() {
    assert!((ei_score(0.15, 1.0, 1.0).unwrap() - 1.0).abs() < 1e-12);
    assert!((ei_score(0.15, 1.0, 0.0).unwrap() - 1.0 / 0.15).abs() < 1e-12);
    assert!((ei_score(0.15, 1.0, 2.0).unwrap() - 1.0 / 1.85).abs() < 1e-12);
    assert_eq!(ei_score(0.15, 0.0, 1.0), Err(TpeError::NonpositiveDensity(0.0)));
}

#[test]
fn identical_trees_return_the_first_candidate() {
    let s = two_level_space();
    let on = s.config_from_pairs(&[("a", "on"), ("b", "0.3"), ("c", "0.1")]).unwrap();
    let t = build_parzen(&[&on], &s);
    let mut rng = rng_for(1, 0);
    let cands: Vec<Config> = (0..10).map(|_| t.sample(&s, &mut rng)).collect();
    assert_eq!(select_candidate(&t, &t, &s, &cands), Some((0, 0.0)));
    let mut r1 = rng_for(2, 0);
    let mut r2 = rng_for(2, 0);
    assert_eq!(propose_tpe(&t, &t, &s, 1, &mut r1).config, t.sample(&s, &mut r2));
}

#[test]
fn proposal_follows_the_density_ratio() {
    let s = validate_space(
        &[ParamDef::categorical("a", &["x", "y"], "x"), ParamDef::real("v", 0.0, 1.0, 0.5)],
        "a",
    )
    .unwrap();
    let at = |v: f64| s.config_from_pairs(&[("a", "x"), ("v", &v.to_string())]).unwrap();
    let good: Vec<Config> = (0..20).map(|i| at(0.18 + 0.002 * i as f64)).collect();
    let bad: Vec<Config> = (0..20).map(|i| at(0.78 + 0.002 * i as f64)).collect();
    let l = build_parzen(&good.iter().collect::<Vec<_>>(), &s);
    let g = build_parzen(&bad.iter().collect::<Vec<_>>(), &s);
    let mut hits = 0;
    for seed in 0..100 {
        let p = propose_tpe(&l, &g, &s, 100, &mut rng_for(seed, 3));
        let v = p.config.get(1).unwrap().as_f64();
        if (v - 0.2).abs() < (v - 0.8).abs() {
            hits += 1;
        }
    }
    assert!(hits >= 95, "{hits}");
}

#[test]
fn continuous_estimators_integrate_to_one() {
    let mut rng = rng_for(4, 0);
    for trial in 0..30 {
        let m = rng.random_range(0..=50);
        let (lo, hi) = if trial % 2 == 0 { (0.0, 1.0) } else { (-3.0, 7.5) };
        let pts: Vec<f64> = (0..m).map(|_| rng.random_range(lo..hi)).collect();
        let p = Parzen::new(lo, hi, &pts);
        let total = adaptive_simpson(&|x| p.pdf(x), lo, hi, 1e-10);
        assert!((total - 1.0).abs() < 1e-6, "m {m}: {total}");
    }
}

#[test]
fn estimate_improves_with_more_data() {
    // truth: 0.5 N(0.3, 0.05) + 0.5 N(0.7, 0.1), truncated to [0, 1]
    let truth = Parzen { lo: 0.0, hi: 1.0, mus: vec![0.3, 0.7], sigmas: vec![0.05, 0.1], masses: vec![1.0, 1.0] };
    let true_pdf = |x: f64| (truth.pdf(x) * 3.0 - 1.0) / 2.0;
    let mut rng = rng_for(9, 0);
    let mut draw = |n: usize| -> Vec<f64> {
        (0..n)
            .map(|_| loop {
                let (mu, s) = if rng.random::<bool>() { (0.3, 0.05) } else { (0.7, 0.1) };
                let x: f64 = Normal::new(mu, s).unwrap().sample(&mut rng);
                if (0.0..1.0).contains(&x) {
                    break x;
                }
            })
            .collect()
    };
    let l1 = |pts: &[f64]| {
        let p = Parzen::new(0.0, 1.0, pts);
        adaptive_simpson(&|x| (p.pdf(x) - true_pdf(x)).abs(), 0.0, 1.0, 1e-7)
    };
    let small = l1(&draw(50));
    let large = l1(&draw(600));
    assert!(large < small, "{large} vs {small}");
}

#[test]
fn integer_coordinates_round_trip() {
    let s = validate_space(
        &[
            ParamDef::categorical("a", &["x", "y"], "x"),
            ParamDef::integer("k", 1, 9, 3),
            ParamDef::integer("n", 2, 512, 10).log(),
        ],
        "a",
    )
    .unwrap();
    for p in &s.params()[1..] {
        let Domain::Integer { lo, hi } = p.domain else { panic!() };
        let (a, b) = coordinate_bounds(p);
        for v in lo..=hi {
            let t = to_coordinate(p, &Value::Int(v));
            assert!(a < t && t < b);
            assert_eq!(from_coordinate(p, t), Value::Int(v));
        }
    }
}

#[test]
fn tpe_runs_deterministically_on_full_folds() {
    let bench = SyntheticCash::new(3);
    let a = run_smbo(&mut Tpe::default(), bench.space(), &bench, 90, 6, None).unwrap();
    let b = run_smbo(&mut Tpe::default(), bench.space(), &bench, 90, 6, None).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.evaluations() % 3, 0);
    for id in 0..a.history.configs().len() {
        assert!(matches!(a.history.folds_of(id).len(), 0 | 3));
    }
    assert!(a.final_cv_loss() < 0.9);
}
