//! Majorization-minimization outer loop, the convexity certificate, and the
//! screened pipeline.
//!
//! Each MM step replaces the log-shift penalty by its tangent line in `f`,
//! giving a weighted sparse-group graphical lasso with weights
//! `w_ij = γ / (1 + f(Ω̃_ij)/β)`, solved by [`admm`](crate::admm).

use std::time::Instant;

use log::{debug, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::admm::{solve_weighted_ggl_with_dual, AdmmConfig, WeightMatrix};
use crate::error::{Error, Result};
use crate::matcore::{operator_norm, SymMatrix};
use crate::objective::{objective_value, CovarianceSet, Hyperparams, PrecisionSet, CAP_SLACK};
use crate::penalty::mm_weight;
use crate::screening::{self, PartitionSummary, ScreeningPartition};

/// Absolute slack allowed on the MM descent check.
pub const DESCENT_SLACK: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub admm: AdmmConfig,
    /// Relative change in `F` below which MM stops.
    pub mm_tol: f64,
    pub mm_max_iter: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            admm: AdmmConfig::default(),
            mm_tol: 1e-6,
            mm_max_iter: 50,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        self.admm.validate()?;
        if !(self.mm_tol > 0.0) {
            return Err(Error::Invalid(format!("mm_tol must be positive, got {}", self.mm_tol)));
        }
        if self.mm_max_iter == 0 {
            return Err(Error::Invalid("mm_max_iter must be at least 1".into()));
        }
        Ok(())
    }
}

/// Outcome of the convexity check.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Certificate {
    pub certified: bool,
    pub beta_required: f64,
}

/// Sufficient condition for `F` to be convex on the capped set:
///
/// ```text
/// β ≥ γ L² max_k b_k² / n_k,   L = ν√K + (1 − ν).
/// ```
///
/// The log-shift term has curvature at least `−γL²/β` along any direction of
/// unit norm in one edge's K-vector, while `−(n_k/2) log det` contributes at
/// least `n_k/b_k²` along a symmetric off-diagonal pair direction, which has
/// Frobenius norm `√2`. An infinite cap with `γ > 0` gives an infinite
/// requirement, met only by `β = ∞`.
pub fn certify_convexity(cov: &CovarianceSet, hp: &Hyperparams) -> Certificate {
    if hp.gamma == 0.0 {
        return Certificate { certified: true, beta_required: 0.0 };
    }
    let l = hp.penalty().lipschitz();
    let worst = hp
        .b
        .iter()
        .zip(cov.sample_sizes())
        .map(|(&b, &n)| b * b / n)
        .fold(0.0, f64::max);
    let beta_required = hp.gamma * l * l * worst;
    Certificate {
        certified: hp.beta >= beta_required,
        beta_required,
    }
}

/// Per-block MM record inside a [`SolveReport`].
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BlockTrace {
    pub size: usize,
    pub objective_trace: Vec<f64>,
    pub admm_iterations: Vec<usize>,
    pub converged: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SolveReport {
    /// `F` after each MM step; nonincreasing.
    pub objective_trace: Vec<f64>,
    pub mm_iterations: usize,
    /// ADMM iterations spent in each MM step, summed over blocks.
    pub admm_iterations: Vec<usize>,
    pub converged: bool,
    pub convexity_certified: bool,
    #[serde(with = "crate::serde_ext::extended_real")]
    pub beta_required: f64,
    pub blocks: PartitionSummary,
    pub block_traces: Vec<BlockTrace>,
    /// Pairs `i < j` with a nonzero coefficient in some graph.
    pub edge_count: usize,
    /// Some ADMM run returned its dense Θ iterate because Z was not positive
    /// definite.
    pub theta_substituted: bool,
    /// Largest violation of the stationarity conditions of `F`, or `None`
    /// when a spectral cap is active.
    pub kkt_residual: Option<f64>,
    /// Seconds spent; left out of the JSON so reports are reproducible.
    #[serde(skip_serializing)]
    pub wall_time: f64,
}

impl SolveReport {
    pub fn final_objective(&self) -> f64 {
        self.objective_trace.last().copied().unwrap_or(f64::NAN)
    }
}

/// Number of pairs `i < j` with `Ω⁽ᵏ⁾_ij ≠ 0` for some `k`.
pub fn edge_count(omega: &PrecisionSet) -> usize {
    let p = omega.p();
    let mut count = 0;
    for i in 0..p {
        for j in (i + 1)..p {
            if omega.matrices().iter().any(|m| m.get(i, j) != 0.0) {
                count += 1;
            }
        }
    }
    count
}

fn check_inputs(cov: &CovarianceSet, hp: &Hyperparams, cfg: &SolverConfig) -> Result<()> {
    hp.validate()?;
    hp.check_k(cov.k())?;
    cfg.validate()
}

fn default_init(k: usize, p: usize, caps: &[f64]) -> PrecisionSet {
    let omega = (0..k)
        .map(|g| SymMatrix::identity(p).scale(caps[g].min(1.0)))
        .collect();
    PrecisionSet::new(omega).expect("nonempty")
}

fn check_init(init: &PrecisionSet, cov: &CovarianceSet, hp: &Hyperparams) -> Result<()> {
    if init.k() != cov.k() || init.p() != cov.p() {
        return Err(Error::Dimension("initial precision set has the wrong shape".into()));
    }
    if !crate::objective::in_feasible_set(hp, init) {
        return Err(Error::Invalid(
            "initial precision set is not positive definite within the spectral caps".into(),
        ));
    }
    Ok(())
}

fn mm_weights(hp: &Hyperparams, anchor: &PrecisionSet) -> Result<WeightMatrix> {
    let spec = hp.penalty();
    let p = anchor.p();
    let w = SymMatrix::from_fn(p, |i, j| {
        if i == j {
            0.0
        } else {
            mm_weight(hp.gamma, hp.beta, spec.value(&anchor.edge(i, j)))
        }
    });
    WeightMatrix::new(w)
}

struct MmOutcome {
    omega: PrecisionSet,
    trace: BlockTrace,
    theta_substituted: bool,
}

/// Ridge-regularized inverse of each sample covariance, shrunk into the caps.
fn dense_init(cov: &CovarianceSet, caps: &[f64]) -> Result<PrecisionSet> {
    let omega = cov
        .covs()
        .iter()
        .zip(caps)
        .map(|(s, &cap)| {
            let p = s.dim();
            let ridge = 0.05 * (s.diag().iter().sum::<f64>() / p as f64).max(1e-12);
            let inv = s.axpy(ridge, &SymMatrix::identity(p)).inverse_pd()?;
            let norm = operator_norm(&inv)?;
            Ok(if norm > cap { inv.scale(0.99 * cap / norm) } else { inv })
        })
        .collect::<Result<Vec<_>>>()?;
    PrecisionSet::new(omega)
}

/// MM from the default start. Without a certificate the objective can have a
/// sparse and a dense basin, so a second run from a dense start is kept when
/// it ends lower.
fn mm_core(
    cov: &CovarianceSet,
    hp: &Hyperparams,
    cfg: &SolverConfig,
    init: Option<&PrecisionSet>,
) -> Result<MmOutcome> {
    let first = mm_run(cov, hp, cfg, init)?;
    if init.is_some() || hp.beta.is_infinite() || certify_convexity(cov, hp).certified {
        return Ok(first);
    }
    let start = dense_init(cov, &hp.b)?;
    let second = mm_run(cov, hp, cfg, Some(&start))?;
    let last = |o: &MmOutcome| *o.trace.objective_trace.last().unwrap_or(&f64::INFINITY);
    if last(&second) < last(&first) {
        debug!("dense start reached {:e} below the default start", last(&first) - last(&second));
        Ok(second)
    } else {
        Ok(first)
    }
}

fn mm_run(
    cov: &CovarianceSet,
    hp: &Hyperparams,
    cfg: &SolverConfig,
    init: Option<&PrecisionSet>,
) -> Result<MmOutcome> {
    let (k, p) = (cov.k(), cov.p());
    let spec = hp.penalty();
    let mut omega = match init {
        Some(x) => {
            check_init(x, cov, hp)?;
            x.clone()
        }
        None => default_init(k, p, &hp.b),
    };
    let mut f_prev = objective_value(cov, hp, &omega)?;
    let mut dual: Option<Vec<SymMatrix>> = None;
    let mut weights: Option<WeightMatrix> = None;
    let mut trace = Vec::new();
    let mut admm_iters = Vec::new();
    let mut converged = false;
    let mut theta_substituted = false;

    for t in 1..=cfg.mm_max_iter {
        let w = mm_weights(hp, &omega)?;
        if weights.as_ref() == Some(&w) {
            // The subproblem would be the one just solved.
            converged = true;
            break;
        }
        let mut res = solve_weighted_ggl_with_dual(
            cov,
            &w,
            &spec,
            &cfg.admm,
            &hp.b,
            Some(&omega),
            dual.as_deref(),
        )?;
        let mut f_new = objective_value(cov, hp, &res.solution)?;
        let mut spent = res.iterations;
        if f_new > f_prev + DESCENT_SLACK {
            // An inexact subproblem solve can overshoot; retry more tightly.
            let tight = AdmmConfig {
                eps_abs: cfg.admm.eps_abs * 1e-2,
                eps_rel: cfg.admm.eps_rel * 1e-2,
                max_iter: cfg.admm.max_iter * 5,
                ..cfg.admm.clone()
            };
            debug!("MM step {t}: F rose by {:e}, re-solving", f_new - f_prev);
            res = solve_weighted_ggl_with_dual(
                cov,
                &w,
                &spec,
                &tight,
                &hp.b,
                Some(&res.solution),
                Some(&res.dual),
            )?;
            spent += res.iterations;
            f_new = objective_value(cov, hp, &res.solution)?;
            if f_new > f_prev + DESCENT_SLACK {
                debug!("MM step {t}: no descent after re-solve, keeping previous iterate");
                admm_iters.push(spent);
                converged = true;
                break;
            }
        }
        theta_substituted |= res.theta_substituted;
        admm_iters.push(spent);
        trace.push(f_new);
        omega = res.solution;
        dual = Some(res.dual);
        weights = Some(w);
        let change = (f_new - f_prev).abs();
        let stop = change <= cfg.mm_tol * (1.0 + f_prev.abs());
        f_prev = f_new;
        if stop {
            converged = true;
            break;
        }
    }
    if trace.is_empty() {
        trace.push(f_prev);
    }
    Ok(MmOutcome {
        omega,
        trace: BlockTrace {
            size: p,
            objective_trace: trace,
            admm_iterations: admm_iters,
            converged,
        },
        theta_substituted,
    })
}

/// Minimizer of `Σ_k (n_k/2)(s_k θ_k − log θ_k)` over `0 < θ_k ≤ b_k`.
fn singleton(cov: &CovarianceSet, hp: &Hyperparams) -> Result<MmOutcome> {
    let omega: Vec<SymMatrix> = (0..cov.k())
        .map(|g| {
            let s = cov.cov(g).get(0, 0);
            let theta = (1.0 / s).min(hp.b[g]);
            if theta.is_finite() {
                Ok(SymMatrix::from_diag(&[theta]))
            } else {
                Err(Error::NotPositiveDefinite)
            }
        })
        .collect::<Result<_>>()?;
    let omega = PrecisionSet::new(omega)?;
    let f = objective_value(cov, hp, &omega)?;
    Ok(MmOutcome {
        omega,
        trace: BlockTrace {
            size: 1,
            objective_trace: vec![f],
            admm_iterations: vec![],
            converged: true,
        },
        theta_substituted: false,
    })
}

fn combine_traces(traces: &[BlockTrace]) -> (Vec<f64>, Vec<usize>) {
    let steps = traces.iter().map(|t| t.objective_trace.len()).max().unwrap_or(0);
    let objective = (0..steps)
        .map(|s| {
            traces
                .iter()
                .map(|t| t.objective_trace[s.min(t.objective_trace.len() - 1)])
                .sum()
        })
        .collect();
    let admm_steps = traces.iter().map(|t| t.admm_iterations.len()).max().unwrap_or(0);
    let admm = (0..admm_steps)
        .map(|s| traces.iter().filter_map(|t| t.admm_iterations.get(s)).sum())
        .collect();
    (objective, admm)
}

fn build_report(
    cov: &CovarianceSet,
    hp: &Hyperparams,
    part: &ScreeningPartition,
    omega: &PrecisionSet,
    outcomes: &[MmOutcome],
    started: Instant,
) -> SolveReport {
    let cert = certify_convexity(cov, hp);
    let block_traces: Vec<BlockTrace> = outcomes.iter().map(|o| o.trace.clone()).collect();
    let (objective_trace, admm_iterations) = combine_traces(&block_traces);
    SolveReport {
        mm_iterations: block_traces.iter().map(|t| t.admm_iterations.len()).max().unwrap_or(0),
        objective_trace,
        admm_iterations,
        converged: block_traces.iter().all(|t| t.converged),
        convexity_certified: cert.certified,
        beta_required: cert.beta_required,
        blocks: part.summary(),
        block_traces,
        edge_count: edge_count(omega),
        theta_substituted: outcomes.iter().any(|o| o.theta_substituted),
        kkt_residual: kkt_residual(cov, hp, omega).ok().flatten(),
        wall_time: started.elapsed().as_secs_f64(),
    }
}

/// Runs MM on the whole problem without screening, starting from `init`
/// (default: the identity, shrunk to fit any cap below one).
pub fn mm_solve(
    cov: &CovarianceSet,
    hp: &Hyperparams,
    cfg: &SolverConfig,
    init: Option<&PrecisionSet>,
) -> Result<(PrecisionSet, SolveReport)> {
    check_inputs(cov, hp, cfg)?;
    let started = Instant::now();
    let out = mm_core(cov, hp, cfg, init)?;
    let part = ScreeningPartition::trivial(cov.p());
    let omega = out.omega.clone();
    let report = build_report(cov, hp, &part, &omega, &[out], started);
    Ok((omega, report))
}

/// Screens, solves each block by MM in parallel, and reassembles.
pub fn fit(
    cov: &CovarianceSet,
    hp: &Hyperparams,
    cfg: &SolverConfig,
) -> Result<(PrecisionSet, SolveReport)> {
    fit_from(cov, hp, cfg, None)
}

/// [`fit`] with a warm start; each block starts from the matching principal
/// submatrices of `init`.
pub fn fit_from(
    cov: &CovarianceSet,
    hp: &Hyperparams,
    cfg: &SolverConfig,
    init: Option<&PrecisionSet>,
) -> Result<(PrecisionSet, SolveReport)> {
    check_inputs(cov, hp, cfg)?;
    if let Some(x) = init {
        check_init(x, cov, hp)?;
    }
    let started = Instant::now();
    let part = screening::screen(cov, hp);
    debug!("screening: {} blocks, largest {}", part.blocks.len(), part.summary().largest);
    let outcomes = part
        .blocks
        .par_iter()
        .map(|idx| {
            let sub = cov.restrict(idx);
            if idx.len() == 1 {
                singleton(&sub, hp)
            } else {
                let warm = init.map(|x| x.restrict(idx));
                mm_core(&sub, hp, cfg, warm.as_ref())
            }
        })
        .collect::<Result<Vec<_>>>()?;
    let blocks: Vec<PrecisionSet> = outcomes.iter().map(|o| o.omega.clone()).collect();
    let omega = screening::assemble(&part, &blocks)?;
    let report = build_report(cov, hp, &part, &omega, &outcomes, started);
    Ok((omega, report))
}

/// Fits every grid point, visiting them in decreasing `γ` and warm-starting
/// each from the previous success. Results come back in grid order; a failed
/// point does not stop the sweep.
pub fn fit_path(
    cov: &CovarianceSet,
    grid: &[Hyperparams],
    cfg: &SolverConfig,
) -> Vec<Result<(PrecisionSet, SolveReport)>> {
    let mut order: Vec<usize> = (0..grid.len()).collect();
    order.sort_by(|&a, &b| grid[b].gamma.total_cmp(&grid[a].gamma));
    let mut out: Vec<Option<Result<(PrecisionSet, SolveReport)>>> =
        (0..grid.len()).map(|_| None).collect();
    let mut warm: Option<PrecisionSet> = None;
    let mut last_edges: Option<(f64, usize)> = None;
    for idx in order {
        let hp = &grid[idx];
        let start = warm
            .as_ref()
            .filter(|w| crate::objective::in_feasible_set(hp, w) && w.k() == cov.k());
        let res = fit_from(cov, hp, cfg, start);
        match &res {
            Ok((omega, report)) => {
                if hp.beta.is_infinite() {
                    if let Some((g, e)) = last_edges {
                        if report.edge_count < e {
                            warn!(
                                "edge count fell from {e} at gamma {g} to {} at gamma {}",
                                report.edge_count, hp.gamma
                            );
                        }
                    }
                    last_edges = Some((hp.gamma, report.edge_count));
                }
                warm = Some(omega.clone());
            }
            Err(e) => warn!("grid point {idx} (gamma {}) failed: {e}", hp.gamma),
        }
        out[idx] = Some(res);
    }
    out.into_iter().map(|r| r.expect("every point visited")).collect()
}

/// Largest violation of the first-order conditions of `F` at `omega`:
/// `(n_k/2)(S − Ω⁻¹)_ii = 0` on diagonals and, for each pair,
/// `−(n_k(S⁽ᵏ⁾ − Ω⁽ᵏ⁾⁻¹)_ij)_k ∈ w_ij ∂f(Ω_ij)` with `w_ij` the log-shift
/// slope at `f(Ω_ij)`. Returns `None` when some `Ω⁽ᵏ⁾` sits on its spectral
/// cap, where a multiplier term would be needed.
pub fn kkt_residual(cov: &CovarianceSet, hp: &Hyperparams, omega: &PrecisionSet) -> Result<Option<f64>> {
    hp.check_k(cov.k())?;
    if omega.k() != cov.k() || omega.p() != cov.p() {
        return Err(Error::Dimension("precision set does not match covariances".into()));
    }
    for (m, &cap) in omega.matrices().iter().zip(&hp.b) {
        if cap.is_finite() && operator_norm(m)? >= cap - 1e-6 - CAP_SLACK {
            return Ok(None);
        }
    }
    let (k, p) = (cov.k(), cov.p());
    let spec = hp.penalty();
    let nu = hp.nu;
    let grads: Vec<SymMatrix> = (0..k)
        .map(|g| {
            let inv = omega.get(g).inverse_pd()?;
            Ok(cov.cov(g).axpy(-1.0, &inv).scale(cov.n(g)))
        })
        .collect::<Result<_>>()?;
    let mut worst: f64 = 0.0;
    for i in 0..p {
        for g in &grads {
            worst = worst.max(0.5 * g.get(i, i).abs());
        }
    }
    for i in 0..p {
        for j in (i + 1)..p {
            let x = omega.edge(i, j);
            let neg_g: Vec<f64> = grads.iter().map(|g| -g.get(i, j)).collect();
            let w = mm_weight(hp.gamma, hp.beta, spec.value(&x));
            let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
            let viol = if norm == 0.0 {
                let box_dist = neg_g
                    .iter()
                    .map(|v| (v.abs() - w * nu).max(0.0).powi(2))
                    .sum::<f64>()
                    .sqrt();
                (box_dist - w * (1.0 - nu)).max(0.0)
            } else {
                neg_g
                    .iter()
                    .zip(&x)
                    .map(|(&v, &xk)| {
                        let r = v - w * (1.0 - nu) * xk / norm;
                        if xk != 0.0 {
                            (r - w * nu * xk.signum()).abs()
                        } else {
                            (r.abs() - w * nu).max(0.0)
                        }
                    })
                    .fold(0.0, f64::max)
            };
            worst = worst.max(viol);
        }
    }
    Ok(Some(worst))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::admm::solve_weighted_ggl;
    use crate::testutil::{random_cov_set, rng};
    use rand::Rng;

    fn assert_descent(report: &SolveReport) {
        for w in report.objective_trace.windows(2) {
            assert!(w[1] <= w[0] + DESCENT_SLACK, "trace rose: {:?}", report.objective_trace);
        }
        for t in &report.block_traces {
            for w in t.objective_trace.windows(2) {
                assert!(w[1] <= w[0] + DESCENT_SLACK);
            }
        }
    }

    fn cov1(n: f64, s: &[[f64; 2]; 2]) -> CovarianceSet {
        let m = SymMatrix::from_fn(2, |i, j| s[i][j]);
        CovarianceSet::new(vec![m], vec![n]).unwrap()
    }

    #[test]
    fn certificate_examples() {
        let cov = cov1(100.0, &[[1.0, 0.0], [0.0, 1.0]]);
        let hp = Hyperparams::with_caps(0.0, 0.1, 1.0, vec![10.0]).unwrap();
        assert_eq!(certify_convexity(&cov, &hp), Certificate { certified: true, beta_required: 0.0 });

        let hp = Hyperparams::with_caps(2.0, f64::INFINITY, 1.0, vec![10.0]).unwrap();
        assert!(certify_convexity(&cov, &hp).certified);

        let hp = Hyperparams::with_caps(2.0, 2.0, 1.0, vec![10.0]).unwrap();
        let c = certify_convexity(&cov, &hp);
        assert_eq!(c.beta_required, 2.0);
        assert!(c.certified);
        let hp = Hyperparams::with_caps(2.0, 1.0, 1.0, vec![10.0]).unwrap();
        assert!(!certify_convexity(&cov, &hp).certified);

        let hp = Hyperparams::new(2.0, 1e12, 1.0, 1).unwrap();
        let c = certify_convexity(&cov, &hp);
        assert!(!c.certified && c.beta_required.is_infinite());
    }

    #[test]
    fn certificate_uses_worst_graph() {
        let s = vec![SymMatrix::identity(3), SymMatrix::identity(3)];
        let cov = CovarianceSet::new(s, vec![50.0, 200.0]).unwrap();
        let hp = Hyperparams::with_caps(3.0, 1.0, 0.5, vec![4.0, 10.0]).unwrap();
        let l = 0.5 * 2f64.sqrt() + 0.5;
        let expect = 3.0 * l * l * f64::max(16.0 / 50.0, 100.0 / 200.0);
        assert!((certify_convexity(&cov, &hp).beta_required - expect).abs() < 1e-12);
    }

    // A segment inside the capped set on which F is not midpoint convex when
    // β equals half the certified threshold, but is at the threshold.
    #[test]
    fn halved_bound_admits_nonconvex_segment() {
        let cov = cov1(100.0, &[[1.0, 0.3], [0.3, 2.0]]);
        let end = |x: f64| {
            PrecisionSet::new(vec![SymMatrix::from_fn(2, |i, j| if i == j { 9.9 } else { x })]).unwrap()
        };
        let (a, b, mid) = (end(0.0), end(0.1), end(0.05));
        let gap = |beta: f64| {
            let hp = Hyperparams::with_caps(2.0, beta, 1.0, vec![10.0]).unwrap();
            assert!(crate::objective::in_feasible_set(&hp, &b));
            let f = |o: &PrecisionSet| objective_value(&cov, &hp, o).unwrap();
            f(&mid) - 0.5 * (f(&a) + f(&b))
        };
        let hp = Hyperparams::with_caps(2.0, 1.0, 1.0, vec![10.0]).unwrap();
        assert_eq!(certify_convexity(&cov, &hp).beta_required, 2.0);
        assert!(gap(1.0) > 1e-4);
        assert!(gap(2.0) <= 0.0);
    }

    #[test]
    fn infinite_beta_is_one_weighted_solve() {
        let mut r = rng(5);
        let cov = random_cov_set(&mut r, 2, 6, 40.0);
        let hp = Hyperparams::new(6.0, f64::INFINITY, 0.5, 2).unwrap();
        let cfg = SolverConfig::default();
        let (omega, report) = mm_solve(&cov, &hp, &cfg, None).unwrap();
        assert_eq!(report.mm_iterations, 1);
        let w = WeightMatrix::uniform(6, 6.0).unwrap();
        let direct =
            solve_weighted_ggl(&cov, &w, &hp.penalty(), &cfg.admm, &hp.b, None).unwrap();
        assert_eq!(omega, direct.solution);
    }

    #[test]
    fn diagonal_covariance_gives_diagonal_fit() {
        let s = vec![SymMatrix::from_diag(&[0.5, 2.0, 1.5, 3.0]), SymMatrix::from_diag(&[1.0, 0.25, 4.0, 1.0])];
        let cov = CovarianceSet::new(s.clone(), vec![20.0, 30.0]).unwrap();
        let hp = Hyperparams::new(1.0, 0.5, 0.3, 2).unwrap();
        // Screening solves singletons in closed form; the unscreened path is
        // only as exact as the ADMM tolerance.
        for ((omega, report), tol) in [
            (fit(&cov, &hp, &SolverConfig::default()).unwrap(), 1e-12),
            (mm_solve(&cov, &hp, &SolverConfig::default(), None).unwrap(), 1e-5),
        ] {
            assert_eq!(report.edge_count, 0);
            assert_descent(&report);
            for g in 0..2 {
                for i in 0..4 {
                    let want = 1.0 / s[g].get(i, i);
                    assert!((omega.get(g).get(i, i) - want).abs() <= tol * want);
                }
            }
        }
        let (_, report) = fit(&cov, &hp, &SolverConfig::default()).unwrap();
        assert_eq!(report.blocks.count, 4);
    }

    #[test]
    fn singleton_respects_cap() {
        let cov = CovarianceSet::new(vec![SymMatrix::from_diag(&[0.1])], vec![10.0]).unwrap();
        let hp = Hyperparams::with_caps(1.0, 1.0, 1.0, vec![4.0]).unwrap();
        let (omega, _) = fit(&cov, &hp, &SolverConfig::default()).unwrap();
        assert_eq!(omega.get(0).get(0, 0), 4.0);
        let zero = CovarianceSet::new(vec![SymMatrix::from_diag(&[0.0])], vec![10.0]).unwrap();
        let hp = Hyperparams::new(1.0, 1.0, 1.0, 1).unwrap();
        assert!(matches!(fit(&zero, &hp, &SolverConfig::default()), Err(Error::NotPositiveDefinite)));
    }

    #[test]
    fn block_diagonal_blocks_solve_independently() {
        let mut r = rng(8);
        let a = random_cov_set(&mut r, 2, 4, 60.0);
        let b = random_cov_set(&mut r, 2, 3, 60.0);
        let s: Vec<SymMatrix> = (0..2)
            .map(|g| {
                SymMatrix::from_fn(7, |i, j| match (i < 4, j < 4) {
                    (true, true) => a.cov(g).get(i, j),
                    (false, false) => b.cov(g).get(i - 4, j - 4),
                    _ => 0.0,
                })
            })
            .collect();
        let cov = CovarianceSet::new(s, vec![60.0, 60.0]).unwrap();
        let hp = Hyperparams::new(0.5, 2.0, 0.5, 2).unwrap();
        let cfg = SolverConfig::default();
        let (omega, report) = fit(&cov, &hp, &cfg).unwrap();
        assert_eq!(report.blocks.sizes, vec![4, 3]);
        let (oa, _) = fit(&a, &hp, &cfg).unwrap();
        let (ob, _) = fit(&b, &hp, &cfg).unwrap();
        assert_eq!(omega.restrict(&[0, 1, 2, 3]), oa);
        assert_eq!(omega.restrict(&[4, 5, 6]), ob);
    }

    #[test]
    fn large_gamma_screens_everything() {
        let mut r = rng(9);
        let cov = random_cov_set(&mut r, 2, 5, 30.0);
        let hp = Hyperparams::new(1e6, 1.0, 0.5, 2).unwrap();
        let (omega, report) = fit(&cov, &hp, &SolverConfig::default()).unwrap();
        assert_eq!(report.blocks.count, 5);
        assert_eq!(report.edge_count, 0);
        for g in 0..2 {
            for i in 0..5 {
                assert_eq!(omega.get(g).get(i, i), 1.0 / cov.cov(g).get(i, i));
            }
        }
    }

    #[test]
    fn graphical_lasso_kkt_holds() {
        let mut r = rng(10);
        for _ in 0..3 {
            let cov = random_cov_set(&mut r, 1, 6, 50.0);
            let hp = Hyperparams::new(r.random_range(2.0..8.0), f64::INFINITY, 1.0, 1).unwrap();
            let (_, report) = fit(&cov, &hp, &SolverConfig::default()).unwrap();
            assert!(report.kkt_residual.unwrap() <= 1e-4, "{:?}", report.kkt_residual);
        }
    }

    #[test]
    fn logshift_solution_is_stationary() {
        let mut r = rng(11);
        let cov = random_cov_set(&mut r, 2, 5, 80.0);
        let hp = Hyperparams::new(5.0, 1.0, 0.5, 2).unwrap();
        let cfg = SolverConfig { mm_tol: 1e-10, mm_max_iter: 200, ..SolverConfig::default() };
        let (_, report) = mm_solve(&cov, &hp, &cfg, None).unwrap();
        assert_descent(&report);
        assert!(report.kkt_residual.unwrap() < 1e-3, "{:?}", report.kkt_residual);
    }

    #[test]
    fn mm_descends_in_nonconvex_regime() {
        let mut r = rng(12);
        for _ in 0..5 {
            let cov = random_cov_set(&mut r, 3, 6, 30.0);
            let hp = Hyperparams::new(r.random_range(1.0..10.0), r.random_range(0.05..2.0), r.random(), 3)
                .unwrap();
            let (_, report) = mm_solve(&cov, &hp, &SolverConfig::default(), None).unwrap();
            assert_descent(&report);
            assert!(!report.convexity_certified);
        }
    }

    #[test]
    fn dense_start_escapes_sparse_basin() {
        // n|S₁₂| = 25 < γ, so the identity start stalls at a zero edge, but
        // with β this small the penalty is nearly flat away from zero.
        let s = SymMatrix::from_fn(2, |i, j| if i == j { [1.3, 0.8][i] } else { 0.5 });
        let cov = CovarianceSet::new(vec![s], vec![50.0]).unwrap();
        let hp = Hyperparams::new(30.0, 0.01, 1.0, 1).unwrap();
        let cfg = SolverConfig::default();
        let sparse = mm_run(&cov, &hp, &cfg, None).unwrap();
        assert_eq!(sparse.omega.get(0).get(0, 1), 0.0);
        let (omega, report) = mm_solve(&cov, &hp, &cfg, None).unwrap();
        assert!(omega.get(0).get(0, 1) != 0.0);
        assert!(report.final_objective() < *sparse.trace.objective_trace.last().unwrap() - 1.0);
        assert_descent(&report);
    }

    #[test]
    fn fixed_point_is_stable() {
        let mut r = rng(13);
        let cov = random_cov_set(&mut r, 2, 5, 60.0);
        let hp = Hyperparams::new(4.0, 1.0, 0.5, 2).unwrap();
        let cfg = SolverConfig::default();
        let (omega, report) = mm_solve(&cov, &hp, &cfg, None).unwrap();
        let f0 = report.final_objective();
        let (_, again) = mm_solve(&cov, &hp, &cfg, Some(&omega)).unwrap();
        assert!((again.final_objective() - f0).abs() <= cfg.mm_tol * (1.0 + f0.abs()));
    }

    #[test]
    fn init_must_be_feasible() {
        let mut r = rng(14);
        let cov = random_cov_set(&mut r, 1, 3, 20.0);
        let hp = Hyperparams::with_caps(1.0, 1.0, 1.0, vec![0.5]).unwrap();
        let bad = PrecisionSet::identity(1, 3);
        assert!(mm_solve(&cov, &hp, &SolverConfig::default(), Some(&bad)).is_err());
        let (omega, _) = mm_solve(&cov, &hp, &SolverConfig::default(), None).unwrap();
        assert!(crate::objective::in_feasible_set(&hp, &omega));
    }

    #[test]
    fn path_single_point_matches_fit() {
        let mut r = rng(15);
        let cov = random_cov_set(&mut r, 2, 5, 40.0);
        let hp = Hyperparams::new(3.0, 1.0, 0.5, 2).unwrap();
        let cfg = SolverConfig::default();
        let path = fit_path(&cov, std::slice::from_ref(&hp), &cfg);
        let (a, _) = path.into_iter().next().unwrap().unwrap();
        let (b, _) = fit(&cov, &hp, &cfg).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn path_keeps_grid_order_and_records_failures() {
        let mut r = rng(16);
        let cov = random_cov_set(&mut r, 2, 5, 40.0);
        let grid = vec![
            Hyperparams::new(1.0, f64::INFINITY, 0.5, 2).unwrap(),
            Hyperparams::new(5.0, f64::INFINITY, 0.5, 3).unwrap(),
            Hyperparams::new(8.0, f64::INFINITY, 0.5, 2).unwrap(),
        ];
        let out = fit_path(&cov, &grid, &SolverConfig::default());
        assert!(out[1].is_err());
        let e0 = out[0].as_ref().unwrap().1.edge_count;
        let e2 = out[2].as_ref().unwrap().1.edge_count;
        assert!(e0 >= e2);
    }

    #[test]
    fn report_serializes_infinite_requirement() {
        let mut r = rng(17);
        let cov = random_cov_set(&mut r, 1, 3, 20.0);
        let hp = Hyperparams::new(1.0, 1.0, 1.0, 1).unwrap();
        let (_, report) = fit(&cov, &hp, &SolverConfig::default()).unwrap();
        let v = serde_json::to_value(&report).unwrap();
        assert_eq!(v["beta_required"], "inf");
        assert_eq!(v["convexity_certified"], false);
    }
}
