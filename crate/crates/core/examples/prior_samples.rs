//! Draws edge coefficients from the hierarchical Laplace prior whose
//! negative log marginal is the log-shift penalty.

use logshift::datagen::{sample_prior_edges, PriorConfig};

fn main() -> logshift::Result<()> {
    let cfg = PriorConfig { alpha: 1.0, beta: 1.0, k: 2 };
    let draws = sample_prior_edges(&cfg, 100_000, 9)?;
    let l1: Vec<f64> = draws.iter().map(|v| v.iter().map(|x| x.abs()).sum()).collect();
    for t in [0.1, 1.0, 10.0, 100.0] {
        let frac = l1.iter().filter(|&&x| x > t).count() as f64 / l1.len() as f64;
        println!("P(|v|_1 > {t:>5}) = {frac:.4}");
    }
    Ok(())
}
