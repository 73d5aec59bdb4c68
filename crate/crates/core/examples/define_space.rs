//! Build a small conditional space, sample from it and walk a neighbourhood.

use cash::paramspace::{validate_space, ParamDef};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let space = validate_space(
        &[
            ParamDef::categorical("model", &["knn", "tree"], "knn"),
            ParamDef::integer("knn.k", 1, 64, 5).log().when("model", &["knn"]),
            ParamDef::categorical("tree.criterion", &["gini", "entropy"], "gini").when("model", &["tree"]),
            ParamDef::integer("tree.depth", 1, 20, 8).when("model", &["tree"]),
            ParamDef::real("tree.min_gain", 1e-5, 1e-1, 1e-3).log().when("tree.criterion", &["entropy"]),
        ],
        "model",
    )?;
    let census = space.census();
    println!("{} parameters, {} conditional, depth {}", census.parameters, census.conditional, census.max_depth);

    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..4 {
        let c = space.sample_random(&mut rng);
        let mut active: Vec<String> = space.active_params(&c).into_iter().collect();
        active.sort();
        println!("sample: {:<55} active: {}", space.describe(&c), active.join(", "));
        println!("  encoded: {:?}", space.impute_defaults(&c).0);
    }

    let start = space.default_config();
    println!("neighbours of {}:", space.describe(&start));
    for n in space.neighbors(&start, &mut rng) {
        println!("  {}", space.describe(&n));
    }
    println!("{}", space.to_json().lines().take(12).collect::<Vec<_>>().join("\n"));
    Ok(())
}
