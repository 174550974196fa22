//! The sparse-group regularizer `f(x) = ν‖x‖₁ + (1−ν)‖x‖₂` applied to the
//! K-vector of one edge's coefficients, the log-shift wrapper
//! `β log(1 + f/β)`, and their proximal maps.
//!
//! `β = f64::INFINITY` is a legal value everywhere and means the linear
//! limit, in which the log-shift penalty is `f` itself.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Regularizer parameters: the ℓ1/ℓ2 mix `nu` and the number of graphs.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PenaltySpec {
    nu: f64,
    k: usize,
    lipschitz: f64,
}

impl PenaltySpec {
    pub fn new(nu: f64, k: usize) -> Result<Self> {
        if !(0.0..=1.0).contains(&nu) {
            return Err(Error::Invalid(format!("nu must lie in [0, 1], got {nu}")));
        }
        if k == 0 {
            return Err(Error::Invalid("number of graphs must be positive".into()));
        }
        Ok(PenaltySpec {
            nu,
            k,
            lipschitz: nu * (k as f64).sqrt() + (1.0 - nu),
        })
    }

    pub fn nu(&self) -> f64 {
        self.nu
    }

    pub fn k(&self) -> usize {
        self.k
    }

    /// Euclidean Lipschitz constant of `f`; tight, attained along
    /// equal-magnitude directions.
    pub fn lipschitz(&self) -> f64 {
        self.lipschitz
    }

    /// `f(v) = ν‖v‖₁ + (1−ν)‖v‖₂`.
    pub fn value(&self, v: &[f64]) -> f64 {
        debug_assert_eq!(v.len(), self.k);
        let l1: f64 = v.iter().map(|x| x.abs()).sum();
        let l2 = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        self.nu * l1 + (1.0 - self.nu) * l2
    }

    /// `argmin_x ½‖x − v‖² + step·f(x)`: elementwise soft-threshold by
    /// `step·ν`, then group shrinkage by `step·(1−ν)`.
    pub fn prox(&self, v: &[f64], step: f64) -> Vec<f64> {
        let mut out = Vec::with_capacity(v.len());
        self.prox_into(v, step, &mut out);
        out
    }

    pub(crate) fn prox_into(&self, v: &[f64], step: f64, out: &mut Vec<f64>) {
        debug_assert!(step >= 0.0);
        out.clear();
        let t1 = step * self.nu;
        out.extend(v.iter().map(|&x| x.signum() * (x.abs() - t1).max(0.0)));
        let norm = out.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm == 0.0 {
            out.iter_mut().for_each(|x| *x = 0.0);
            return;
        }
        let scale = (1.0 - step * (1.0 - self.nu) / norm).max(0.0);
        if scale == 0.0 {
            out.iter_mut().for_each(|x| *x = 0.0);
        } else {
            out.iter_mut().for_each(|x| *x *= scale);
        }
    }

    /// Whether `v ∈ ∂f(0)`, i.e. `‖(|v| − ν)₊‖₂ ≤ 1 − ν`.
    pub fn in_subgradient_at_zero(&self, v: &[f64]) -> bool {
        let excess: f64 = v
            .iter()
            .map(|x| {
                let e = (x.abs() - self.nu).max(0.0);
                e * e
            })
            .sum();
        excess.sqrt() <= 1.0 - self.nu
    }
}

/// `β log(1 + fval/β)`, or `fval` when `β` is infinite.
pub fn logshift_value(beta: f64, fval: f64) -> Result<f64> {
    if !(fval >= 0.0) {
        return Err(Error::Domain(format!(
            "log-shift argument must be nonnegative, got {fval}"
        )));
    }
    Ok(logshift_unchecked(beta, fval))
}

#[inline]
pub(crate) fn logshift_unchecked(beta: f64, fval: f64) -> f64 {
    if beta.is_infinite() {
        fval
    } else {
        beta * (fval / beta).ln_1p()
    }
}

/// Majorization weight `γ / (1 + fval_prev/β)`: the slope of the
/// log-shift penalty at the anchor.
pub fn mm_weight(gamma: f64, beta: f64, fval_prev: f64) -> f64 {
    if beta.is_infinite() {
        gamma
    } else {
        gamma / (1.0 + fval_prev / beta)
    }
}

/// Validates a log-shift scale.
pub fn check_beta(beta: f64) -> Result<()> {
    if beta > 0.0 {
        Ok(())
    } else {
        Err(Error::Invalid(format!(
            "beta must be positive or inf, got {beta}"
        )))
    }
}

/// Global minimizer of `½(y − x)² + γ·β log(1 + |x|/β)`.
///
/// Candidates are 0 and the positive roots of
/// `x² + (β − |y|)x + β(γ − |y|) = 0`; ties go to 0.
pub fn scalar_logshift_prox(y: f64, gamma: f64, beta: f64) -> f64 {
    let a = y.abs();
    if a == 0.0 {
        return 0.0;
    }
    if gamma == 0.0 {
        return y;
    }
    if beta.is_infinite() {
        return y.signum() * (a - gamma).max(0.0);
    }
    let objective = |x: f64| 0.5 * (a - x) * (a - x) + gamma * beta * (x / beta).ln_1p();
    let b = beta - a;
    let c = beta * (gamma - a);
    let disc = b * b - 4.0 * c;
    let mut best = 0.0;
    let mut best_val = objective(0.0);
    if disc >= 0.0 {
        let q = -0.5 * (b + b.signum() * disc.sqrt());
        let roots = if q == 0.0 { [0.0, 0.0] } else { [q, c / q] };
        for x in roots {
            if x > 0.0 && x.is_finite() {
                let v = objective(x);
                if v < best_val {
                    best = x;
                    best_val = v;
                }
            }
        }
    }
    y.signum() * best
}
