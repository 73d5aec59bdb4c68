use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Default number of simulated parallel batches.
pub const DEFAULT_SAMPLES: usize = 100_000;

/// The run a batch would report: lowest CV loss, ties to the lower seed.
pub fn batch_winner(cv: &[f64], seeds: &[u64], batch: &[usize]) -> usize {
    *batch
        .iter()
        .min_by(|&&a, &&b| cv[a].total_cmp(&cv[b]).then(seeds[a].cmp(&seeds[b])))
        .expect("nonempty batch")
}

/// `sorted[(n - 1) / 2]`.
pub fn lower_median(xs: &[f64]) -> Option<f64> {
    if xs.is_empty() {
        return None;
    }
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    Some(v[(v.len() - 1) / 2])
}

/// Medians of the winners' CV and test losses over bootstrap batches.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BootstrapMedians {
    pub cv: f64,
    pub test: f64,
}

/// Draws `samples` batches of `batch` runs with replacement and takes the
/// lower median of each batch winner's CV and test loss.
pub fn bootstrap_medians(
    cv: &[f64],
    test: &[f64],
    seeds: &[u64],
    batch: usize,
    samples: usize,
    rng_seed: u64,
) -> BootstrapMedians {
    assert!(!cv.is_empty() && cv.len() == test.len() && cv.len() == seeds.len(), "runs must line up");
    let n = cv.len();
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let mut idx = vec![0; batch.max(1)];
    let (mut cvs, mut tests) = (Vec::with_capacity(samples), Vec::with_capacity(samples));
    for _ in 0..samples.max(1) {
        for i in idx.iter_mut() {
            *i = rng.random_range(0..n);
        }
        let w = batch_winner(cv, seeds, &idx);
        cvs.push(cv[w]);
        tests.push(test[w]);
    }
    BootstrapMedians { cv: lower_median(&cvs).unwrap(), test: lower_median(&tests).unwrap() }
}
