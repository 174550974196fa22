//! Screening splits the variables into blocks that can be fitted separately.
//! Larger γ removes more candidate edges.

use logshift::datagen::{self, SimConfig};
use logshift::{dataio, screening, Hyperparams};

fn main() -> logshift::Result<()> {
    let sim = datagen::simulate(&SimConfig::new(30, 2, vec![50, 50], 11))?;
    let cov = dataio::sample_covariance(&sim.observations);
    for gamma in [20.0, 40.0, 80.0, 160.0, 320.0] {
        let hp = Hyperparams::new(gamma, f64::INFINITY, 0.5, 2)?;
        let part = screening::screen(&cov, &hp);
        let s = part.summary();
        println!(
            "gamma {gamma:>5}: {:>2} blocks, largest {:>2}, {:>3} pairs screened out",
            s.count, s.largest, s.edges_screened_out
        );
    }
    Ok(())
}
