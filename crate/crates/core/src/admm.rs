//! Scaled-form ADMM for the weighted sparse-group graphical lasso
//!
//! ```text
//! minimize  Σ_k (n_k/2)(⟨S⁽ᵏ⁾, Θ⁽ᵏ⁾⟩ − log det Θ⁽ᵏ⁾) + Σ_{i<j} w_ij f(Z_ij)
//! subject to Θ = Z,  ‖Θ⁽ᵏ⁾‖_op ≤ b_k,
//! ```
//!
//! which is the subproblem solved at every majorization-minimization step.
//! The spectral cap lives in the Θ-update: that update is separable in the
//! eigenbasis and each scalar problem is convex, so the capped minimizer is the
//! clamped unconstrained one.
//!
//! Each off-diagonal pair appears twice in `‖Θ − Z + U‖²_F` but once in the
//! penalty, so the Z-update thresholds with step `w_ij / (2ρ)`.
//!
//! [`AdmmConfig::rho`] is relative: the solver runs with `ρ·n̄/2`, where `n̄`
//! is the mean sample size, so one setting suits any sample size.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matcore::{chol_logdet, sym_eigen, SymMatrix};
use crate::objective::{CovarianceSet, PrecisionSet};
use crate::penalty::PenaltySpec;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdmmConfig {
    /// Augmented-Lagrangian parameter in units of `n̄/2`.
    pub rho: f64,
    pub max_iter: usize,
    pub eps_abs: f64,
    pub eps_rel: f64,
}

impl Default for AdmmConfig {
    fn default() -> Self {
        AdmmConfig {
            rho: 1.0,
            max_iter: 2000,
            eps_abs: 1e-6,
            eps_rel: 1e-6,
        }
    }
}

impl AdmmConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.rho > 0.0 && self.rho.is_finite()) {
            return Err(Error::Invalid(format!("rho must be positive, got {}", self.rho)));
        }
        if self.max_iter == 0 {
            return Err(Error::Invalid("max_iter must be at least 1".into()));
        }
        if !(self.eps_abs > 0.0 && self.eps_rel > 0.0) {
            return Err(Error::Invalid("ADMM tolerances must be positive".into()));
        }
        Ok(())
    }
}

/// Per-edge penalty weights: symmetric, nonnegative, zero diagonal.
#[derive(Clone, Debug, PartialEq)]
pub struct WeightMatrix(SymMatrix);

impl WeightMatrix {
    pub fn new(w: SymMatrix) -> Result<Self> {
        for i in 0..w.dim() {
            if w.get(i, i) != 0.0 {
                return Err(Error::Invalid("weight matrix must have a zero diagonal".into()));
            }
        }
        if let Some((i, j, x)) = w.upper_pairs().find(|&(_, _, x)| !(x >= 0.0)) {
            return Err(Error::Invalid(format!("weight ({i}, {j}) = {x} is negative")));
        }
        Ok(WeightMatrix(w))
    }

    /// The same weight on every off-diagonal pair.
    pub fn uniform(p: usize, w: f64) -> Result<Self> {
        Self::new(SymMatrix::from_fn(p, |i, j| if i == j { 0.0 } else { w }))
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.0.get(i, j)
    }

    pub fn dim(&self) -> usize {
        self.0.dim()
    }

    pub fn as_matrix(&self) -> &SymMatrix {
        &self.0
    }
}

/// Closed-form minimizer over `{Θ ≻ 0, ‖Θ‖_op ≤ cap}` of
/// `(n_k/2)(⟨S⁽ᵏ⁾, Θ⟩ − log det Θ) + (ρ/2)‖Θ − target‖²_F`.
///
/// With `ρ·target − (n_k/2)S⁽ᵏ⁾ = V diag(λ) Vᵀ`, the eigenvalues of the
/// minimizer are `min(cap, (λ + sqrt(λ² + 2 n_k ρ)) / (2ρ))`.
pub fn theta_update(
    cov: &CovarianceSet,
    k: usize,
    target: &SymMatrix,
    rho: f64,
    cap: f64,
) -> Result<SymMatrix> {
    let n = cov.n(k);
    let m = target.scale(rho).axpy(-0.5 * n, cov.cov(k));
    let eig = sym_eigen(&m)?;
    Ok(eig.reconstruct_with(|l| theta_eigenvalue(l, n, rho).min(cap)))
}

/// Positive root of `ρθ² − λθ − n/2 = 0`.
#[inline]
pub(crate) fn theta_eigenvalue(lambda: f64, n: f64, rho: f64) -> f64 {
    let disc = (lambda * lambda + 2.0 * n * rho).sqrt();
    if lambda >= 0.0 {
        (lambda + disc) / (2.0 * rho)
    } else {
        // (λ + √(λ² + 2nρ)) / 2ρ rewritten to avoid cancellation.
        n / (disc - lambda)
    }
}

/// Proximal step on the penalty: off-diagonal K-vectors are shrunk with step
/// `w_ij / (2ρ)`, diagonals pass through.
pub fn z_update(
    theta_plus_u: &[SymMatrix],
    w: &WeightMatrix,
    spec: &PenaltySpec,
    rho: f64,
) -> Vec<SymMatrix> {
    let k = theta_plus_u.len();
    let p = theta_plus_u[0].dim();
    let mut out: Vec<SymMatrix> = theta_plus_u.to_vec();
    let mut v = vec![0.0; k];
    let mut shrunk = Vec::with_capacity(k);
    for i in 0..p {
        for j in (i + 1)..p {
            for (x, m) in v.iter_mut().zip(theta_plus_u) {
                *x = m.get(i, j);
            }
            spec.prox_into(&v, w.get(i, j) / (2.0 * rho), &mut shrunk);
            for (m, &x) in out.iter_mut().zip(&shrunk) {
                m.set(i, j, x);
            }
        }
    }
    out
}

/// Output of one ADMM run.
#[derive(Clone, Debug)]
pub struct AdmmResult {
    /// Z iterate (exactly sparse), or Θ when Z is not positive definite.
    pub solution: PrecisionSet,
    pub theta: PrecisionSet,
    /// Scaled dual variable at exit, usable as a warm start.
    pub dual: Vec<SymMatrix>,
    pub iterations: usize,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub converged: bool,
    /// The reported solution is Θ because Z failed the PD check.
    pub theta_substituted: bool,
}

fn pooled_norm(ms: &[SymMatrix]) -> f64 {
    ms.iter().map(SymMatrix::frobenius_sq).sum::<f64>().sqrt()
}

fn pooled_diff(a: &[SymMatrix], b: &[SymMatrix]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| x.axpy(-1.0, y).frobenius_sq())
        .sum::<f64>()
        .sqrt()
}

/// The augmented-Lagrangian parameter actually used: `cfg.rho · n̄/2`.
pub fn effective_rho(cfg: &AdmmConfig, cov: &CovarianceSet) -> f64 {
    let mean_n = cov.sample_sizes().iter().sum::<f64>() / cov.k() as f64;
    cfg.rho * 0.5 * mean_n
}

/// Solves the weighted problem from `Z = warm` (identity by default), `U = 0`.
pub fn solve_weighted_ggl(
    cov: &CovarianceSet,
    w: &WeightMatrix,
    spec: &PenaltySpec,
    cfg: &AdmmConfig,
    caps: &[f64],
    warm: Option<&PrecisionSet>,
) -> Result<AdmmResult> {
    solve_weighted_ggl_with_dual(cov, w, spec, cfg, caps, warm, None)
}

/// As [`solve_weighted_ggl`], optionally resuming from a previous scaled
/// dual `U`.
pub fn solve_weighted_ggl_with_dual(
    cov: &CovarianceSet,
    w: &WeightMatrix,
    spec: &PenaltySpec,
    cfg: &AdmmConfig,
    caps: &[f64],
    warm: Option<&PrecisionSet>,
    warm_dual: Option<&[SymMatrix]>,
) -> Result<AdmmResult> {
    cfg.validate()?;
    let (k, p) = (cov.k(), cov.p());
    if w.dim() != p || spec.k() != k || caps.len() != k {
        return Err(Error::Dimension(
            "weights, penalty and caps must match the covariance set".into(),
        ));
    }
    let rho = effective_rho(cfg, cov);
    let mut z: Vec<SymMatrix> = match warm {
        Some(ws) => {
            if ws.k() != k || ws.p() != p {
                return Err(Error::Dimension("warm start has the wrong shape".into()));
            }
            ws.matrices().to_vec()
        }
        None => vec![SymMatrix::identity(p); k],
    };
    let mut u: Vec<SymMatrix> = match warm_dual {
        Some(d) if d.len() == k && d.iter().all(|m| m.dim() == p) => d.to_vec(),
        Some(_) => return Err(Error::Dimension("warm dual has the wrong shape".into())),
        None => vec![SymMatrix::zeros(p); k],
    };
    let mut theta = z.clone();
    let scale_abs = cfg.eps_abs * p as f64 * (k as f64).sqrt();
    let (mut r_norm, mut s_norm) = (f64::INFINITY, f64::INFINITY);
    let mut converged = false;
    let mut iterations = 0;

    for it in 1..=cfg.max_iter {
        iterations = it;
        theta = (0..k)
            .into_par_iter()
            .map(|g| theta_update(cov, g, &z[g].axpy(-1.0, &u[g]), rho, caps[g]))
            .collect::<Result<Vec<_>>>()?;
        let theta_plus_u: Vec<SymMatrix> =
            theta.iter().zip(&u).map(|(t, uu)| t.axpy(1.0, uu)).collect();
        let z_new = z_update(&theta_plus_u, w, spec, rho);
        for g in 0..k {
            u[g] = theta_plus_u[g].axpy(-1.0, &z_new[g]);
        }
        r_norm = pooled_diff(&theta, &z_new);
        s_norm = rho * pooled_diff(&z_new, &z);
        z = z_new;
        let eps_pri = scale_abs + cfg.eps_rel * pooled_norm(&theta).max(pooled_norm(&z));
        let eps_dual = scale_abs + cfg.eps_rel * rho * pooled_norm(&u);
        if r_norm <= eps_pri && s_norm <= eps_dual {
            converged = true;
            break;
        }
    }

    let z_pd = z.iter().all(|m| chol_logdet(m).is_ok());
    let theta_set = PrecisionSet::new(theta)?;
    let solution = if z_pd {
        PrecisionSet::new(z)?
    } else {
        theta_set.clone()
    };
    Ok(AdmmResult {
        solution,
        theta: theta_set,
        dual: u,
        iterations,
        primal_residual: r_norm,
        dual_residual: s_norm,
        converged,
        theta_substituted: !z_pd,
    })
}
