//! Joint estimation of K sparse Gaussian graphical models under the
//! log-shift penalty.
//!
//! The estimator minimizes
//!
//! ```text
//! F(Ω) = Σ_k (n_k/2)(⟨S⁽ᵏ⁾, Ω⁽ᵏ⁾⟩ − log det Ω⁽ᵏ⁾) + γ Σ_{i<j} β log(1 + f(Ω_ij)/β)
//! ```
//!
//! over K positive-definite precision matrices, where `Ω_ij` is the K-vector
//! of coefficients at position `(i, j)` and `f = ν‖·‖₁ + (1−ν)‖·‖₂`. The
//! pipeline is: screen the covariances into independent blocks
//! ([`screening`]), run majorization-minimization on each block with a
//! weighted sparse-group ADMM inner solver ([`solver`], [`admm`]), and
//! reassemble.
//!
//! ```no_run
//! use logshift::{datagen, dataio, solver, Hyperparams};
//!
//! let sim = datagen::simulate(&datagen::SimConfig::new(20, 2, vec![60, 60], 3)).unwrap();
//! let cov = dataio::sample_covariance(&sim.observations);
//! let hp = Hyperparams::new(8.0, 0.5, 0.5, 2).unwrap();
//! let (omega, report) = solver::fit(&cov, &hp, &solver::SolverConfig::default()).unwrap();
//! println!("{} edges, certified = {}", report.edge_count, report.convexity_certified);
//! # let _ = omega;
//! ```

pub mod admm;
pub mod cli;
pub mod datagen;
pub mod dataio;
pub mod error;
pub mod matcore;
pub mod metrics;
pub mod objective;
pub mod penalty;
pub mod screening;
pub mod serde_ext;
pub mod solver;

pub use error::{Error, Result};
pub use matcore::SymMatrix;
pub use objective::{CovarianceSet, Hyperparams, PrecisionSet};
pub use penalty::PenaltySpec;
pub use screening::ScreeningPartition;
pub use solver::{SolveReport, SolverConfig};

/// Version tag carried by every JSON document the crate writes.
pub const SCHEMA_VERSION: u32 = 1;

#[cfg(test)]
pub(crate) mod testutil {
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use crate::matcore::SymMatrix;
    use crate::objective::{CovarianceSet, PrecisionSet};

    pub fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    pub fn random_sym(r: &mut impl Rng, p: usize, scale: f64) -> SymMatrix {
        SymMatrix::from_fn(p, |_, _| r.random_range(-scale..scale))
    }

    /// `AᵀA/p + ridge·I` with uniform entries in A.
    pub fn random_pd(r: &mut impl Rng, p: usize, ridge: f64) -> SymMatrix {
        let a = nalgebra::DMatrix::from_fn(p, p, |_, _| r.random_range(-1.0..1.0));
        let m = a.transpose() * a / p as f64;
        SymMatrix::from_fn(p, |i, j| m[(i, j)] + if i == j { ridge } else { 0.0 })
    }

    pub fn random_cov_set(r: &mut impl Rng, k: usize, p: usize, n: f64) -> CovarianceSet {
        let s = (0..k).map(|_| random_pd(r, p, 0.2)).collect();
        CovarianceSet::new(s, vec![n; k]).unwrap()
    }

    pub fn random_precision_set(r: &mut impl Rng, k: usize, p: usize) -> PrecisionSet {
        PrecisionSet::new((0..k).map(|_| random_pd(r, p, 0.3)).collect()).unwrap()
    }
}
