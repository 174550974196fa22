//! Sweep a (γ, β) grid with warm starts and pick the point with the best
//! validation likelihood.

use logshift::datagen::{self, SimConfig};
use logshift::solver::{self, SolverConfig};
use logshift::{dataio, metrics, Hyperparams, PrecisionSet};

fn main() -> logshift::Result<()> {
    let mut cfg = SimConfig::new(15, 2, vec![50; 2], 3);
    cfg.n_validation = Some(vec![50; 2]);
    let sim = datagen::simulate(&cfg)?;
    let train = dataio::sample_covariance(&sim.observations);
    let val = dataio::sample_covariance(sim.validation.as_ref().unwrap());
    let truth = PrecisionSet::new(sim.truth)?;

    let mut grid = Vec::new();
    for beta in [0.2, 1.0, f64::INFINITY] {
        for gamma in [4.0, 8.0, 16.0, 32.0] {
            grid.push(Hyperparams::new(gamma, beta, 0.5, 2)?);
        }
    }
    let fits = solver::fit_path(&train, &grid, &SolverConfig::default());
    let candidates: Vec<Option<&PrecisionSet>> =
        fits.iter().map(|r| r.as_ref().ok().map(|(o, _)| o)).collect();
    for (hp, fit) in grid.iter().zip(&fits) {
        match fit {
            Ok((omega, report)) => println!(
                "gamma {:>4} beta {:>4}: {:>3} edges, validation nll {:.3}, error {:.3}",
                hp.gamma,
                hp.beta,
                report.edge_count,
                metrics::heldout_negloglik(&val, omega)?,
                metrics::relative_error(&truth, omega)?
            ),
            Err(e) => println!("gamma {} beta {}: {e}", hp.gamma, hp.beta),
        }
    }
    let best = metrics::select_by_validation(&candidates, &val)?;
    println!("selected gamma {} beta {}", grid[best].gamma, grid[best].beta);
    Ok(())
}
