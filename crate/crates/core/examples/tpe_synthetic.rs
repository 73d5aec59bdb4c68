//! TPE on the synthetic benchmark, then a look at the good/bad densities it
//! builds from the history.

use cash::smbo::run_smbo;
use cash::synthetic::SyntheticCash;
use cash::tpe::{build_parzen, ei_score, split_history, Estimator, Tpe, DEFAULT_GAMMA};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let bench = SyntheticCash::new(5);
    let space = bench.space();
    let run = run_smbo(&mut Tpe::default(), space, &bench, 300, 2, None)?;
    println!(
        "{} configs, incumbent {} (true loss {:.4})",
        run.history.configs().len(),
        space.describe(run.incumbent_config()),
        bench.true_loss(run.incumbent_config())
    );

    let split = split_history(&run.history, DEFAULT_GAMMA)?;
    println!("threshold {:.4}: {} good, {} bad", split.threshold, split.good.len(), split.bad.len());
    let side = |ids: &[usize]| ids.iter().map(|&i| run.history.config(i)).collect::<Vec<_>>();
    let l = build_parzen(&side(&split.good), space);
    let g = build_parzen(&side(&split.bad), space);
    let x = space.index_of("quad.x").unwrap();
    if let (Estimator::Continuous(lx), Estimator::Continuous(gx)) = (&l.nodes[x].estimator, &g.nodes[x].estimator) {
        println!("   x    l(x)    g(x)    ei");
        for i in 0..=10 {
            let v = i as f64 / 10.0;
            let (a, b) = (lx.pdf(v), gx.pdf(v));
            println!("{v:>4.1} {a:>7.3} {b:>7.3} {:>6.3}", ei_score(DEFAULT_GAMMA, a, b)?);
        }
    }
    Ok(())
}
