//! Simulate three related tridiagonal graphs, fit them jointly and score the
//! estimate against the truth and a validation sample.

use logshift::datagen::{self, SimConfig};
use logshift::metrics::MetricsReport;
use logshift::solver::{self, SolverConfig};
use logshift::{dataio, Hyperparams, PrecisionSet};

fn main() -> logshift::Result<()> {
    let mut cfg = SimConfig::new(20, 3, vec![60; 3], 7);
    cfg.n_validation = Some(vec![60; 3]);
    let sim = datagen::simulate(&cfg)?;
    let train = dataio::sample_covariance(&sim.observations);
    let val = dataio::sample_covariance(sim.validation.as_ref().unwrap());

    let hp = Hyperparams::new(12.0, 0.5, 0.5, 3)?;
    let (omega, report) = solver::fit(&train, &hp, &SolverConfig::default())?;
    println!(
        "{} MM iterations, {} blocks, objective {:.4}",
        report.mm_iterations,
        report.blocks.count,
        report.final_objective()
    );

    let truth = PrecisionSet::new(sim.truth)?;
    let m = MetricsReport::compute(&omega, Some(&val), Some(&truth))?;
    println!("{}", serde_json::to_string_pretty(&m).unwrap());
    Ok(())
}
