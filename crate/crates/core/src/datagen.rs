//! Synthetic data: tridiagonal precision matrices with a shared support,
//! Gaussian sampling, and draws from the hierarchical edge prior.
//!
//! All randomness comes from ChaCha8 streams keyed by `(seed, stream)`, so
//! outputs are a pure function of the configuration and seed on every
//! platform. Each graph and each purpose gets its own stream; no generator is
//! shared across them.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, Gamma, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::dataio::ObservationSet;
use crate::error::{Error, Result};
use crate::matcore::{cholesky_lower, SymMatrix};

/// Stream ids; the per-graph index is added to the base.
const STREAM_PRECISION: u64 = 0;
const STREAM_TRAIN: u64 = 1 << 20;
const STREAM_VALIDATION: u64 = 2 << 20;

fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(stream);
    r
}

fn default_diag() -> f64 {
    1.0
}
fn default_range() -> (f64, f64) {
    (0.4, 0.6)
}
fn default_margin() -> f64 {
    0.1
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub p: usize,
    pub k: usize,
    /// Training sample size per graph.
    pub n: Vec<usize>,
    pub seed: u64,
    #[serde(default = "default_diag")]
    pub diag_value: f64,
    #[serde(default = "default_range")]
    pub offdiag_range: (f64, f64),
    #[serde(default = "default_margin")]
    pub pd_margin: f64,
    /// Optional validation sample sizes, drawn from independent streams.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_validation: Option<Vec<usize>>,
}

impl SimConfig {
    pub fn new(p: usize, k: usize, n: Vec<usize>, seed: u64) -> Self {
        SimConfig {
            p,
            k,
            n,
            seed,
            diag_value: default_diag(),
            offdiag_range: default_range(),
            pd_margin: default_margin(),
            n_validation: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.p == 0 || self.k == 0 {
            return Err(Error::Invalid("p and k must be positive".into()));
        }
        if self.n.len() != self.k {
            return Err(Error::Invalid(format!(
                "{} sample sizes for {} graphs",
                self.n.len(),
                self.k
            )));
        }
        if let Some(v) = &self.n_validation {
            if v.len() != self.k {
                return Err(Error::Invalid("n_validation must have one entry per graph".into()));
            }
        }
        let (lo, hi) = self.offdiag_range;
        if !(lo > 0.0 && lo <= hi && hi.is_finite()) {
            return Err(Error::Invalid(format!("offdiag_range must satisfy 0 < lo <= hi, got ({lo}, {hi})")));
        }
        if !(self.diag_value > 0.0 && self.pd_margin > 0.0) {
            return Err(Error::Invalid("diag_value and pd_margin must be positive".into()));
        }
        Ok(())
    }
}

/// K tridiagonal precision matrices with identical support and
/// independently drawn values `±U(lo, hi)` on the first off-diagonal.
/// Diagonals are raised where needed to make every row strictly
/// diagonally dominant.
pub fn gen_tridiag_precisions(cfg: &SimConfig) -> Result<Vec<SymMatrix>> {
    cfg.validate()?;
    let (lo, hi) = cfg.offdiag_range;
    let p = cfg.p;
    Ok((0..cfg.k)
        .map(|k| {
            let mut r = stream_rng(cfg.seed, STREAM_PRECISION + k as u64);
            let mut m = SymMatrix::zeros(p);
            for i in 0..p.saturating_sub(1) {
                let mag = if hi > lo { r.random_range(lo..=hi) } else { lo };
                let sign = if r.random::<bool>() { 1.0 } else { -1.0 };
                m.set(i, i + 1, sign * mag);
            }
            for i in 0..p {
                let off: f64 = (0..p).filter(|&j| j != i).map(|j| m.get(i, j).abs()).sum();
                let d = if cfg.diag_value > off {
                    cfg.diag_value
                } else {
                    off + cfg.pd_margin
                };
                m.set(i, i, d);
            }
            m
        })
        .collect())
}

/// `n` iid rows from `N(0, Ω⁻¹)`: with `Ω = LLᵀ`, each row solves
/// `Lᵀx = z` for standard normal `z`.
pub fn sample_mvn(omega: &SymMatrix, n: usize, seed: u64) -> Result<DMatrix<f64>> {
    sample_mvn_stream(omega, n, seed, 0)
}

fn sample_mvn_stream(omega: &SymMatrix, n: usize, seed: u64, stream: u64) -> Result<DMatrix<f64>> {
    let l = cholesky_lower(omega)?;
    let lt = l.transpose();
    let p = omega.dim();
    let mut r = stream_rng(seed, stream);
    let mut out = DMatrix::zeros(n, p);
    for row in 0..n {
        let z = nalgebra::DVector::from_fn(p, |_, _| StandardNormal.sample(&mut r));
        let x = lt
            .solve_upper_triangular(&z)
            .ok_or(Error::NotPositiveDefinite)?;
        out.set_row(row, &x.transpose());
    }
    Ok(out)
}

/// Ground truth plus sampled observations.
#[derive(Clone, Debug)]
pub struct Simulation {
    pub truth: Vec<SymMatrix>,
    pub observations: ObservationSet,
    pub validation: Option<ObservationSet>,
}

/// Generates the precision matrices and samples training (and optionally
/// validation) data for every graph.
pub fn simulate(cfg: &SimConfig) -> Result<Simulation> {
    let truth = gen_tridiag_precisions(cfg)?;
    let names: Vec<String> = (1..=cfg.p).map(|j| format!("V{j}")).collect();
    let draw = |sizes: &[usize], base: u64| -> Result<ObservationSet> {
        let groups = truth
            .iter()
            .zip(sizes)
            .enumerate()
            .map(|(k, (om, &n))| sample_mvn_stream(om, n, cfg.seed, base + k as u64))
            .collect::<Result<Vec<_>>>()?;
        ObservationSet::new(names.clone(), groups)
    };
    let observations = draw(&cfg.n, STREAM_TRAIN)?;
    let validation = match &cfg.n_validation {
        Some(v) => Some(draw(v, STREAM_VALIDATION)?),
        None => None,
    };
    Ok(Simulation {
        truth,
        observations,
        validation,
    })
}

/// Hyperprior of the edge scales: `τ ~ InverseGamma(alpha, beta)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PriorConfig {
    pub alpha: f64,
    pub beta: f64,
    pub k: usize,
}

/// For each edge: `τ ~ InverseGamma(α, β)`, then K iid `Laplace(0, τ)`
/// coefficients. Marginally the edge density is proportional to
/// `(1 + ‖v‖₁/β)^−(α+K)`.
pub fn sample_prior_edges(cfg: &PriorConfig, count: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
    if !(cfg.alpha > 0.0 && cfg.beta > 0.0) || cfg.k == 0 {
        return Err(Error::Invalid("prior needs alpha > 0, beta > 0 and k >= 1".into()));
    }
    // 1/τ ~ Gamma(shape α, rate β)
    let precision = Gamma::new(cfg.alpha, 1.0 / cfg.beta)
        .map_err(|e| Error::Invalid(format!("gamma distribution: {e}")))?;
    let mut r = stream_rng(seed, 0);
    Ok((0..count)
        .map(|_| {
            let tau = 1.0 / precision.sample(&mut r);
            (0..cfg.k)
                .map(|_| {
                    let e: f64 = Exp1.sample(&mut r);
                    if r.random::<bool>() {
                        tau * e
                    } else {
                        -tau * e
                    }
                })
                .collect()
        })
        .collect())
}
