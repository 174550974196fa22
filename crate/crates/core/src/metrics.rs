//! Held-out likelihood, estimation error and edge recovery.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matcore::SymMatrix;
use crate::objective::{log_likelihood, CovarianceSet, PrecisionSet};

/// `Σ_k (n_k/2)(⟨S⁽ᵏ⁾, Ω⁽ᵏ⁾⟩ − log det Ω⁽ᵏ⁾)` on held-out covariances,
/// without the `2π` constant.
pub fn heldout_negloglik(cov_holdout: &CovarianceSet, omega: &PrecisionSet) -> Result<f64> {
    if cov_holdout.k() != omega.k() || cov_holdout.p() != omega.p() {
        return Err(Error::Dimension("held-out covariances do not match the estimate".into()));
    }
    let mut acc = 0.0;
    for k in 0..omega.k() {
        acc -= log_likelihood(cov_holdout, k, omega.get(k))?;
    }
    Ok(acc)
}

/// `sqrt(Σ_k ‖Ω̂⁽ᵏ⁾ − Ω⁽ᵏ⁾‖²_F) / sqrt(Σ_k ‖Ω⁽ᵏ⁾‖²_F)`.
pub fn relative_error(truth: &PrecisionSet, est: &PrecisionSet) -> Result<f64> {
    if truth.k() != est.k() || truth.p() != est.p() {
        return Err(Error::Dimension("estimate and truth differ in shape".into()));
    }
    Ok(est.distance(truth) / truth.frobenius())
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EdgeStats {
    /// Pairs `i < j` nonzero in at least one graph.
    pub edges: usize,
    pub per_graph_edges: Vec<usize>,
    pub tp: Option<usize>,
    pub fp: Option<usize>,
    #[serde(rename = "fn")]
    pub fn_: Option<usize>,
}

/// Union edge count (exact zero test), per-graph counts, and recovery
/// against `truth_mask` when given.
pub fn edge_stats(est: &PrecisionSet, truth_mask: Option<&SymMatrix<bool>>) -> Result<EdgeStats> {
    let p = est.p();
    if let Some(mask) = truth_mask {
        if mask.dim() != p {
            return Err(Error::Dimension(format!(
                "truth mask is {0}x{0}, estimate is {p}x{p}",
                mask.dim()
            )));
        }
    }
    let mut stats = EdgeStats {
        per_graph_edges: vec![0; est.k()],
        ..EdgeStats::default()
    };
    let (mut tp, mut fp, mut fn_) = (0, 0, 0);
    for i in 0..p {
        for j in (i + 1)..p {
            let mut any = false;
            for (count, m) in stats.per_graph_edges.iter_mut().zip(est.matrices()) {
                if m.get(i, j) != 0.0 {
                    *count += 1;
                    any = true;
                }
            }
            stats.edges += usize::from(any);
            if let Some(mask) = truth_mask {
                match (any, mask.get(i, j)) {
                    (true, true) => tp += 1,
                    (true, false) => fp += 1,
                    (false, true) => fn_ += 1,
                    (false, false) => {}
                }
            }
        }
    }
    if truth_mask.is_some() {
        stats.tp = Some(tp);
        stats.fp = Some(fp);
        stats.fn_ = Some(fn_);
    }
    Ok(stats)
}

/// Union support of a set of precision matrices.
pub fn support_mask(omega: &PrecisionSet) -> SymMatrix<bool> {
    SymMatrix::from_fn(omega.p(), |i, j| {
        i != j && omega.matrices().iter().any(|m| m.get(i, j) != 0.0)
    })
}

/// Index of the candidate with the smallest held-out negative
/// log-likelihood; ties go to fewer edges, then the earlier index.
/// `None` entries (failed fits) and candidates whose score cannot be
/// computed are skipped.
pub fn select_by_validation(
    candidates: &[Option<&PrecisionSet>],
    cov_val: &CovarianceSet,
) -> Result<usize> {
    if candidates.is_empty() {
        return Err(Error::Invalid("no candidates to select from".into()));
    }
    let mut best: Option<(f64, usize, usize)> = None;
    for (idx, cand) in candidates.iter().enumerate() {
        let Some(omega) = cand else { continue };
        let Ok(score) = heldout_negloglik(cov_val, omega) else { continue };
        let edges = edge_stats(omega, None)?.edges;
        let better = match best {
            None => true,
            Some((s, e, _)) => score < s || (score == s && edges < e),
        };
        if better {
            best = Some((score, edges, idx));
        }
    }
    best.map(|(_, _, idx)| idx)
        .ok_or_else(|| Error::Invalid("every candidate is infeasible on the validation data".into()))
}

/// The JSON document written by `logshift eval`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub schema_version: u32,
    pub negloglik: Option<f64>,
    pub relative_error: Option<f64>,
    #[serde(flatten)]
    pub edges: EdgeStats,
}

impl MetricsReport {
    pub fn compute(
        est: &PrecisionSet,
        cov_holdout: Option<&CovarianceSet>,
        truth: Option<&PrecisionSet>,
    ) -> Result<Self> {
        let negloglik = cov_holdout.map(|c| heldout_negloglik(c, est)).transpose()?;
        let relative_error = truth.map(|t| relative_error(t, est)).transpose()?;
        let mask = truth.map(support_mask);
        Ok(MetricsReport {
            schema_version: crate::SCHEMA_VERSION,
            negloglik,
            relative_error,
            edges: edge_stats(est, mask.as_ref())?,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testutil::{random_cov_set, random_pd, rng};
    use rand::Rng;

    fn set(ms: Vec<SymMatrix>) -> PrecisionSet {
        PrecisionSet::new(ms).unwrap()
    }

    fn tridiag(p: usize, off: f64) -> SymMatrix {
        SymMatrix::from_fn(p, |i, j| if i == j { 1.0 } else if j == i + 1 { off } else { 0.0 })
    }

    #[test]
    fn negloglik_examples() {
        let cov = CovarianceSet::new(vec![SymMatrix::identity(3)], vec![10.0]).unwrap();
        let omega = PrecisionSet::identity(1, 3);
        assert!((heldout_negloglik(&cov, &omega).unwrap() - 15.0).abs() < 1e-12);
        let cov2 = CovarianceSet::new(vec![SymMatrix::identity(3).scale(0.7)], vec![20.0]).unwrap();
        let cov1 = CovarianceSet::new(vec![SymMatrix::identity(3).scale(0.7)], vec![10.0]).unwrap();
        let a = heldout_negloglik(&cov1, &omega).unwrap();
        let b = heldout_negloglik(&cov2, &omega).unwrap();
        assert!((b - 2.0 * a).abs() < 1e-12);
        let bad = set(vec![SymMatrix::from_diag(&[1.0, -1.0, 1.0])]);
        assert!(matches!(heldout_negloglik(&cov, &bad), Err(Error::NotPositiveDefinite)));
    }

    #[test]
    fn inverse_covariance_minimizes_negloglik() {
        let mut r = rng(1);
        let cov = random_cov_set(&mut r, 2, 4, 30.0);
        let best = set((0..2).map(|g| cov.cov(g).inverse_pd().unwrap()).collect());
        let f0 = heldout_negloglik(&cov, &best).unwrap();
        for _ in 0..200 {
            let moved = set(
                best.matrices()
                    .iter()
                    .map(|m| {
                        let d = SymMatrix::from_fn(4, |_, _| r.random_range(-0.05..0.05));
                        m.axpy(1.0, &d)
                    })
                    .collect(),
            );
            if let Ok(f) = heldout_negloglik(&cov, &moved) {
                assert!(f >= f0 - 1e-12);
            }
        }
    }

    #[test]
    fn relative_error_examples() {
        let mut r = rng(2);
        let truth = set(vec![random_pd(&mut r, 4, 0.5), random_pd(&mut r, 4, 0.5)]);
        assert_eq!(relative_error(&truth, &truth).unwrap(), 0.0);
        let zero = set(vec![SymMatrix::zeros(4); 2]);
        assert!((relative_error(&truth, &zero).unwrap() - 1.0).abs() < 1e-12);
        for c in [0.0, 0.5, 2.0, 3.5] {
            let scaled = set(truth.matrices().iter().map(|m| m.scale(c)).collect());
            assert!((relative_error(&truth, &scaled).unwrap() - (c - 1.0f64).abs()).abs() < 1e-12);
        }
        assert!(relative_error(&truth, &PrecisionSet::identity(1, 4)).is_err());
    }

    #[test]
    fn edge_examples() {
        let diag = PrecisionSet::identity(2, 5);
        assert_eq!(edge_stats(&diag, None).unwrap().edges, 0);

        let t = set(vec![tridiag(100, 0.3)]);
        let mask = support_mask(&t);
        let s = edge_stats(&t, Some(&mask)).unwrap();
        assert_eq!((s.edges, s.tp, s.fp, s.fn_), (99, Some(99), Some(0), Some(0)));
    }

    #[test]
    fn edge_counts_match_double_loop() {
        let mut r = rng(3);
        for _ in 0..50 {
            let p = r.random_range(2..12);
            let k = r.random_range(1..4);
            let est = set(
                (0..k)
                    .map(|_| {
                        SymMatrix::from_fn(p, |i, j| {
                            if i == j || r.random_bool(0.6) { 0.0 } else { r.random_range(-1.0..1.0) }
                        })
                    })
                    .collect(),
            );
            let mask = SymMatrix::from_fn(p, |i, j| i != j && r.random_bool(0.3));
            let got = edge_stats(&est, Some(&mask)).unwrap();
            let (mut e, mut tp, mut fp, mut fn_) = (0, 0, 0, 0);
            let mut per = vec![0; k];
            for i in 0..p {
                for j in 0..p {
                    if j <= i {
                        continue;
                    }
                    let mut hit = false;
                    for g in 0..k {
                        if est.get(g).get(i, j) != 0.0 {
                            per[g] += 1;
                            hit = true;
                        }
                    }
                    e += hit as usize;
                    let truth = mask.get(i, j);
                    tp += (hit && truth) as usize;
                    fp += (hit && !truth) as usize;
                    fn_ += (!hit && truth) as usize;
                }
            }
            assert_eq!(got.edges, e);
            assert_eq!(got.per_graph_edges, per);
            assert_eq!((got.tp, got.fp, got.fn_), (Some(tp), Some(fp), Some(fn_)));
        }
    }

    #[test]
    fn selection_tie_breaks() {
        let mut r = rng(4);
        let cov = random_cov_set(&mut r, 1, 3, 20.0);
        let a = PrecisionSet::identity(1, 3);
        assert_eq!(select_by_validation(&[Some(&a)], &cov).unwrap(), 0);
        assert_eq!(select_by_validation(&[Some(&a), Some(&a)], &cov).unwrap(), 0);
        assert_eq!(select_by_validation(&[None, Some(&a)], &cov).unwrap(), 1);
        assert!(select_by_validation(&[None, None], &cov).is_err());
        assert!(select_by_validation(&[], &cov).is_err());
    }

    #[test]
    fn selection_agrees_with_recompute() {
        let mut r = rng(5);
        for _ in 0..10 {
            let cov = random_cov_set(&mut r, 2, 4, 25.0);
            let cands: Vec<PrecisionSet> = (0..3)
                .map(|_| set(vec![random_pd(&mut r, 4, 0.3), random_pd(&mut r, 4, 0.3)]))
                .collect();
            let refs: Vec<Option<&PrecisionSet>> = cands.iter().map(Some).collect();
            let got = select_by_validation(&refs, &cov).unwrap();
            let scores: Vec<f64> = cands.iter().map(|c| heldout_negloglik(&cov, c).unwrap()).collect();
            let want = (0..3).min_by(|&a, &b| scores[a].total_cmp(&scores[b])).unwrap();
            assert_eq!(got, want);
        }
    }

    #[test]
    fn report_json_shape() {
        let est = set(vec![tridiag(4, 0.2)]);
        let rep = MetricsReport::compute(&est, None, Some(&est)).unwrap();
        let v = serde_json::to_value(&rep).unwrap();
        assert_eq!(v["schema_version"], 1);
        assert_eq!(v["edges"], 3);
        assert_eq!(v["fn"], 0);
        assert_eq!(v["relative_error"], 0.0);
        assert!(v["negloglik"].is_null());
    }
}
