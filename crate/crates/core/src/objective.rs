//! Problem data, the decision variable, and exact evaluation of the
//! penalized negative log-likelihood
//!
//! ```text
//! F(Ω) = −Σ_k L_k(Ω⁽ᵏ⁾) + γ Σ_{i<j} β log(1 + f(Ω_ij)/β),
//! L_k(Ω) = (n_k/2)(log det Ω − ⟨S⁽ᵏ⁾, Ω⟩),
//! ```
//!
//! together with its majorizing surrogate and the spectral-cap feasibility
//! test.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matcore::{chol_logdet, operator_norm, SymMatrix};
use crate::penalty::{check_beta, logshift_unchecked, mm_weight, PenaltySpec};

/// The K sample covariances with their sample sizes.
#[derive(Clone, Debug, PartialEq)]
pub struct CovarianceSet {
    s: Vec<SymMatrix>,
    n: Vec<f64>,
}

impl CovarianceSet {
    pub fn new(s: Vec<SymMatrix>, n: Vec<f64>) -> Result<Self> {
        if s.is_empty() {
            return Err(Error::Invalid("need at least one covariance matrix".into()));
        }
        if s.len() != n.len() {
            return Err(Error::Dimension(format!(
                "{} covariances but {} sample sizes",
                s.len(),
                n.len()
            )));
        }
        let p = s[0].dim();
        for (k, sk) in s.iter().enumerate() {
            if sk.dim() != p {
                return Err(Error::Dimension(format!(
                    "covariance {k} has dimension {} (expected {p})",
                    sk.dim()
                )));
            }
            if !sk.is_finite() {
                return Err(Error::Invalid(format!("covariance {k} has non-finite entries")));
            }
            if sk.diag().iter().any(|&d| d < 0.0) {
                return Err(Error::Invalid(format!("covariance {k} has a negative variance")));
            }
        }
        if let Some(bad) = n.iter().find(|&&x| !(x > 0.0 && x.is_finite())) {
            return Err(Error::Invalid(format!("sample sizes must be positive, got {bad}")));
        }
        Ok(CovarianceSet { s, n })
    }

    pub fn k(&self) -> usize {
        self.s.len()
    }

    pub fn p(&self) -> usize {
        self.s[0].dim()
    }

    pub fn cov(&self, k: usize) -> &SymMatrix {
        &self.s[k]
    }

    pub fn covs(&self) -> &[SymMatrix] {
        &self.s
    }

    pub fn n(&self, k: usize) -> f64 {
        self.n[k]
    }

    pub fn sample_sizes(&self) -> &[f64] {
        &self.n
    }

    /// `(S⁽¹⁾_ij, …, S⁽ᴷ⁾_ij)`.
    pub fn edge(&self, i: usize, j: usize) -> Vec<f64> {
        self.s.iter().map(|s| s.get(i, j)).collect()
    }

    /// Restriction to the rows and columns in `indices`.
    pub fn restrict(&self, indices: &[usize]) -> Self {
        CovarianceSet {
            s: self.s.iter().map(|s| s.submatrix(indices)).collect(),
            n: self.n.clone(),
        }
    }
}

/// K symmetric precision matrices of a common dimension.
#[derive(Clone, Debug, PartialEq)]
pub struct PrecisionSet {
    omega: Vec<SymMatrix>,
}

impl PrecisionSet {
    pub fn new(omega: Vec<SymMatrix>) -> Result<Self> {
        if omega.is_empty() {
            return Err(Error::Invalid("need at least one precision matrix".into()));
        }
        let p = omega[0].dim();
        if omega.iter().any(|m| m.dim() != p) {
            return Err(Error::Dimension("precision matrices differ in dimension".into()));
        }
        Ok(PrecisionSet { omega })
    }

    pub fn identity(k: usize, p: usize) -> Self {
        PrecisionSet {
            omega: vec![SymMatrix::identity(p); k],
        }
    }

    pub fn k(&self) -> usize {
        self.omega.len()
    }

    pub fn p(&self) -> usize {
        self.omega[0].dim()
    }

    pub fn get(&self, k: usize) -> &SymMatrix {
        &self.omega[k]
    }

    pub fn matrices(&self) -> &[SymMatrix] {
        &self.omega
    }

    pub fn into_matrices(self) -> Vec<SymMatrix> {
        self.omega
    }

    /// `(Ω⁽¹⁾_ij, …, Ω⁽ᴷ⁾_ij)`.
    pub fn edge(&self, i: usize, j: usize) -> Vec<f64> {
        self.omega.iter().map(|m| m.get(i, j)).collect()
    }

    pub fn restrict(&self, indices: &[usize]) -> Self {
        PrecisionSet {
            omega: self.omega.iter().map(|m| m.submatrix(indices)).collect(),
        }
    }

    /// Pooled Frobenius norm `sqrt(Σ_k ‖Ω⁽ᵏ⁾‖²_F)`.
    pub fn frobenius(&self) -> f64 {
        self.omega.iter().map(|m| m.frobenius_sq()).sum::<f64>().sqrt()
    }

    /// Pooled Frobenius distance to `other`.
    pub fn distance(&self, other: &Self) -> f64 {
        assert_eq!(self.k(), other.k());
        self.omega
            .iter()
            .zip(&other.omega)
            .map(|(a, b)| a.axpy(-1.0, b).frobenius_sq())
            .sum::<f64>()
            .sqrt()
    }

    pub fn is_positive_definite(&self) -> bool {
        self.omega.iter().all(|m| chol_logdet(m).is_ok())
    }
}

/// Penalty level `gamma`, log-shift scale `beta` (may be infinite), the
/// ℓ1/ℓ2 mix `nu`, and the per-graph spectral caps `b` (may be infinite).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Hyperparams {
    pub gamma: f64,
    #[serde(with = "crate::serde_ext::extended_real")]
    pub beta: f64,
    pub nu: f64,
    #[serde(with = "crate::serde_ext::extended_real_vec")]
    pub b: Vec<f64>,
}

impl Hyperparams {
    /// Uncapped hyperparameters for `k` graphs.
    pub fn new(gamma: f64, beta: f64, nu: f64, k: usize) -> Result<Self> {
        Self::with_caps(gamma, beta, nu, vec![f64::INFINITY; k])
    }

    pub fn with_caps(gamma: f64, beta: f64, nu: f64, b: Vec<f64>) -> Result<Self> {
        let hp = Hyperparams { gamma, beta, nu, b };
        hp.validate()?;
        Ok(hp)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.gamma >= 0.0 && self.gamma.is_finite()) {
            return Err(Error::Invalid(format!(
                "gamma must be finite and nonnegative, got {}",
                self.gamma
            )));
        }
        check_beta(self.beta)?;
        if !(0.0..=1.0).contains(&self.nu) {
            return Err(Error::Invalid(format!("nu must lie in [0, 1], got {}", self.nu)));
        }
        if self.b.is_empty() {
            return Err(Error::Invalid("spectral caps b must be nonempty".into()));
        }
        if let Some(bad) = self.b.iter().find(|&&x| !(x > 0.0)) {
            return Err(Error::Invalid(format!("spectral caps must be positive, got {bad}")));
        }
        Ok(())
    }

    /// Checks that the caps match `k` graphs.
    pub fn check_k(&self, k: usize) -> Result<()> {
        if self.b.len() != k {
            return Err(Error::Dimension(format!(
                "{} spectral caps for {k} graphs",
                self.b.len()
            )));
        }
        Ok(())
    }

    pub fn penalty(&self) -> PenaltySpec {
        PenaltySpec::new(self.nu, self.b.len()).expect("validated hyperparameters")
    }
}

fn check_shapes(cov: &CovarianceSet, omega: &PrecisionSet) -> Result<()> {
    if cov.k() != omega.k() || cov.p() != omega.p() {
        return Err(Error::Dimension(format!(
            "covariances are {}x{}x{}, precisions are {}x{}x{}",
            cov.k(),
            cov.p(),
            cov.p(),
            omega.k(),
            omega.p(),
            omega.p()
        )));
    }
    Ok(())
}

/// `L_k(Ω) = (n_k/2)(log det Ω − ⟨S⁽ᵏ⁾, Ω⟩)`.
pub fn log_likelihood(cov: &CovarianceSet, k: usize, omega_k: &SymMatrix) -> Result<f64> {
    if omega_k.dim() != cov.p() {
        return Err(Error::Dimension("precision and covariance dimensions differ".into()));
    }
    let logdet = chol_logdet(omega_k)?;
    Ok(0.5 * cov.n(k) * (logdet - cov.cov(k).inner(omega_k)))
}

fn neg_loglik_sum(cov: &CovarianceSet, omega: &PrecisionSet) -> Result<f64> {
    let mut acc = 0.0;
    for k in 0..cov.k() {
        acc -= log_likelihood(cov, k, omega.get(k))?;
    }
    Ok(acc)
}

/// `F(Ω)`. Only strict upper-triangle pairs are penalized.
pub fn objective_value(cov: &CovarianceSet, hp: &Hyperparams, omega: &PrecisionSet) -> Result<f64> {
    check_shapes(cov, omega)?;
    hp.check_k(cov.k())?;
    let nll = neg_loglik_sum(cov, omega)?;
    Ok(nll + penalty_value(hp, omega))
}

/// `γ Σ_{i<j} β log(1 + f(Ω_ij)/β)`.
pub fn penalty_value(hp: &Hyperparams, omega: &PrecisionSet) -> f64 {
    if hp.gamma == 0.0 {
        return 0.0;
    }
    let spec = hp.penalty();
    let p = omega.p();
    let mut edge = vec![0.0; omega.k()];
    let mut acc = 0.0;
    for i in 0..p {
        for j in (i + 1)..p {
            for (e, m) in edge.iter_mut().zip(omega.matrices()) {
                *e = m.get(i, j);
            }
            acc += logshift_unchecked(hp.beta, spec.value(&edge));
        }
    }
    hp.gamma * acc
}

/// The MM majorant of `F` anchored at `anchor`, including the constant that
/// makes it touch `F` at `omega == anchor`:
///
/// ```text
/// −Σ_k L_k(Ω) + Σ_{i<j} [ w_ij f(Ω_ij) + γβ( log(1 + a_ij) − a_ij/(1 + a_ij) ) ],
/// a_ij = f(Ω̃_ij)/β,  w_ij = γ/(1 + a_ij).
/// ```
pub fn surrogate_value(
    cov: &CovarianceSet,
    hp: &Hyperparams,
    omega: &PrecisionSet,
    anchor: &PrecisionSet,
) -> Result<f64> {
    check_shapes(cov, omega)?;
    check_shapes(cov, anchor)?;
    hp.check_k(cov.k())?;
    let nll = neg_loglik_sum(cov, omega)?;
    if hp.gamma == 0.0 {
        return Ok(nll);
    }
    let spec = hp.penalty();
    let p = omega.p();
    let mut acc = 0.0;
    for i in 0..p {
        for j in (i + 1)..p {
            let fa = spec.value(&anchor.edge(i, j));
            let f = spec.value(&omega.edge(i, j));
            acc += mm_weight(hp.gamma, hp.beta, fa) * f;
            if hp.beta.is_finite() {
                let a = fa / hp.beta;
                acc += hp.gamma * hp.beta * (a.ln_1p() - a / (1.0 + a));
            }
        }
    }
    Ok(nll + acc)
}

/// Absolute slack on the spectral caps.
pub const CAP_SLACK: f64 = 1e-9;

/// Whether every `Ω⁽ᵏ⁾` is positive definite with `‖Ω⁽ᵏ⁾‖_op ≤ b_k`.
pub fn in_feasible_set(hp: &Hyperparams, omega: &PrecisionSet) -> bool {
    if hp.b.len() != omega.k() {
        return false;
    }
    omega.matrices().iter().zip(&hp.b).all(|(m, &cap)| {
        chol_logdet(m).is_ok()
            && (cap.is_infinite()
                || operator_norm(m).map(|op| op <= cap + CAP_SLACK).unwrap_or(false))
    })
}
