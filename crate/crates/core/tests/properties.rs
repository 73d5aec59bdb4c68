use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use cash::baselines::GridSpec;
use cash::dataspace::{numeric_dataset, split_indices, stratified_folds};
use cash::learners::learner_space;
use cash::paramspace::random_space;
use cash::smac::expected_improvement;
use cash::smbo::spearman_rank;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn sampled_and_neighbor_configs_are_valid(space_seed in 0u64..1000, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(space_seed);
        let space = random_space(&mut rng, 8, 3);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let c = space.sample_random(&mut rng);
        prop_assert!(space.check(&c).is_ok());
        for n in space.neighbors(&c, &mut rng) {
            prop_assert!(space.check(&n).is_ok());
            prop_assert_ne!(&n, &c);
        }
    }

    #[test]
    fn learner_configs_round_trip_through_json(seed in any::<u64>()) {
        let space = learner_space();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let c = space.sample_random(&mut rng);
        let json = space.config_to_json(&c);
        let text = serde_json::to_string(&json).unwrap();
        let back: serde_json::Map<String, serde_json::Value> = serde_json::from_str(&text).unwrap();
        prop_assert_eq!(space.config_from_json(&back).unwrap(), c);
    }

    #[test]
    fn splits_and_folds_are_stratified(
        counts in prop::collection::vec(2usize..40, 2..5),
        k in 2usize..6,
        seed in any::<u64>(),
    ) {
        let labels: Vec<usize> = counts.iter().enumerate().flat_map(|(c, &n)| std::iter::repeat_n(c, n)).collect();
        let rows = (0..labels.len()).map(|i| vec![i as f64]).collect();
        let data = numeric_dataset(rows, labels.clone()).unwrap();

        let (train, test) = split_indices(&data, 0.3, seed).unwrap();
        prop_assert_eq!(train.len() + test.len(), data.len());
        for c in 0..counts.len() {
            prop_assert!(train.iter().any(|&i| labels[i] == c));
            prop_assert!(test.iter().any(|&i| labels[i] == c));
        }

        prop_assume!(k <= data.len());
        let plan = stratified_folds(&data, k, seed).unwrap();
        for c in 0..counts.len() {
            let per_fold: Vec<usize> = (0..k)
                .map(|f| plan.valid_indices(f).iter().filter(|&&i| labels[i] == c).count())
                .collect();
            let (lo, hi) = (per_fold.iter().min().unwrap(), per_fold.iter().max().unwrap());
            prop_assert!(hi - lo <= 1, "class {} spread {:?}", c, per_fold);
        }
        let sizes = plan.fold_sizes();
        prop_assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
    }

    #[test]
    fn spearman_is_bounded(pairs in prop::collection::vec((-5i32..5, -5i32..5), 2..40)) {
        let xs: Vec<f64> = pairs.iter().map(|p| p.0 as f64).collect();
        let ys: Vec<f64> = pairs.iter().map(|p| p.1 as f64).collect();
        if let Ok(rho) = spearman_rank(&xs, &ys) {
            prop_assert!((-1.0 - 1e-12..=1.0 + 1e-12).contains(&rho));
            let self_rho = spearman_rank(&xs, &xs).unwrap();
            prop_assert!((self_rho - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn ei_is_nonnegative_and_dominates_plain_improvement(
        mu in -10.0f64..10.0,
        sigma in 0.0f64..5.0,
        c_min in -10.0f64..10.0,
    ) {
        let ei = expected_improvement(mu, sigma, c_min);
        prop_assert!(ei >= 0.0);
        prop_assert!(ei + 1e-12 >= (c_min - mu).max(0.0));
    }

    #[test]
    fn learner_grid_points_are_valid(index_frac in 0.0f64..1.0) {
        let space = learner_space();
        let grid = GridSpec::for_learners(space);
        let i = ((grid.size() as f64 * index_frac) as u64).min(grid.size() - 1);
        prop_assert!(space.check(&grid.point(i)).is_ok());
    }
}
