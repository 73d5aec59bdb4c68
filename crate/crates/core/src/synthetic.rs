//! A small synthetic CASH problem with a known optimum, used to benchmark the
//! optimizers without training classifiers.
//!
//! The root selector `algo` picks either `const` (loss 0.9 everywhere) or
//! `quad`, whose loss is a bowl over two conditional reals shifted by a
//! per-level offset of the conditional categorical `quad.kind`. The optimum is
//! 0.05 at `kind = a, x = 0.7, y = 0.2`. Per-fold losses carry a zero-sum
//! perturbation, so the k-fold mean equals the analytic loss exactly
//! (barring clipping at 1).

use std::f64::consts::PI;

use crate::evaluator::{FoldOutcome, Objective};
use crate::paramspace::{validate_space, Config, ParamDef, ParamSpace};

pub const OPTIMUM: f64 = 0.05;
pub const CONST_LOSS: f64 = 0.9;
pub const KIND_OFFSETS: [f64; 3] = [0.0, 0.15, 0.3];
pub const X_STAR: f64 = 0.7;
pub const Y_STAR: f64 = 0.2;
pub const CURVATURE: f64 = 4.0;
pub const FOLD_NOISE: f64 = 0.03;

pub fn synthetic_space() -> ParamSpace {
    let defs = [
        ParamDef::categorical("algo", &["const", "quad"], "const"),
        ParamDef::categorical("quad.kind", &["a", "b", "c"], "c").when("algo", &["quad"]),
        ParamDef::real("quad.x", 0.0, 1.0, 0.5).when("algo", &["quad"]),
        ParamDef::real("quad.y", 0.0, 1.0, 0.5).when("algo", &["quad"]),
    ];
    validate_space(&defs, "algo").expect("synthetic space is valid")
}

/// The synthetic benchmark as a k-fold objective.
#[derive(Debug, Clone)]
pub struct SyntheticCash {
    space: ParamSpace,
    k: usize,
}

impl SyntheticCash {
    pub fn new(k: usize) -> Self {
        Self { space: synthetic_space(), k: k.max(1) }
    }

    pub fn space(&self) -> &ParamSpace {
        &self.space
    }

    /// Noise-free loss of a config (the k-fold mean).
    pub fn true_loss(&self, config: &Config) -> f64 {
        let s = &self.space;
        if s.level_name(config, "algo") != Some("quad") {
            return CONST_LOSS;
        }
        let kind = s.value(config, "quad.kind").and_then(|v| v.as_level()).unwrap_or(0);
        let x = s.value(config, "quad.x").map_or(0.5, |v| v.as_f64());
        let y = s.value(config, "quad.y").map_or(0.5, |v| v.as_f64());
        (OPTIMUM + KIND_OFFSETS[kind] + CURVATURE * ((x - X_STAR).powi(2) + (y - Y_STAR).powi(2))).min(1.0)
    }

    fn phase(&self, config: &Config) -> f64 {
        let x = self.space.value(config, "quad.x").map_or(0.0, |v| v.as_f64());
        let y = self.space.value(config, "quad.y").map_or(0.0, |v| v.as_f64());
        (x * 7.3 + y * 3.1).fract()
    }
}

impl Objective for SyntheticCash {
    fn n_folds(&self) -> usize {
        self.k
    }

    fn evaluate(&self, config: &Config, fold: usize) -> FoldOutcome {
        let base = self.true_loss(config);
        let noise = if self.k > 1 {
            FOLD_NOISE * (2.0 * PI * (fold as f64 + self.phase(config)) / self.k as f64).cos()
        } else {
            0.0
        };
        FoldOutcome { loss: (base + noise).clamp(0.0, 1.0), budget_exhausted: false, wall_time_ms: 0.0 }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn optimum_and_zero_sum_noise() {
        let bench = SyntheticCash::new(5);
        let s = bench.space();
        let best = s
            .config_from_pairs(&[("algo", "quad"), ("quad.kind", "a"), ("quad.x", "0.7"), ("quad.y", "0.2")])
            .unwrap();
        s.check(&best).unwrap();
        assert!((bench.true_loss(&best) - OPTIMUM).abs() < 1e-15);
        let mean: f64 = (0..5).map(|f| bench.evaluate(&best, f).loss).sum::<f64>() / 5.0;
        assert!((mean - OPTIMUM).abs() < 1e-12);

        let c = s.config_from_pairs(&[("algo", "const")]).unwrap();
        assert_eq!(bench.true_loss(&c), CONST_LOSS);
    }
}
