use nalgebra::{DMatrix, SymmetricEigen};

use super::{Partition, SubspacePartition};
use crate::agents::RunRecord;
use crate::error::{Error, Result};
use crate::mdp::{policy_value, TabularMdp};

/// Cumulative visits to each side of the partition after each episode.
/// Cells on both sides count for both.
pub fn partition_visit_curves(run: &RunRecord, part: &Partition) -> (Vec<f64>, Vec<f64>) {
    let mut off = Vec::with_capacity(run.episodes.len());
    let mut on = Vec::with_capacity(run.episodes.len());
    let (mut n_off, mut n_on) = (0.0, 0.0);
    for t in run.trajectories() {
        for (h, st) in t.steps.iter().enumerate() {
            if part.is_offline(h, st.state, st.action) {
                n_off += 1.0;
            }
            if part.is_online(h, st.state, st.action) {
                n_on += 1.0;
            }
        }
        off.push(n_off);
        on.push(n_on);
    }
    (off, on)
}

/// Cumulative realized regret `sum_t (v_star - G_t)` with returns on the
/// agent's reward scale, where `v_star` also lives.
pub fn regret_curve(run: &RunRecord, v_star: f64) -> Vec<f64> {
    let mut total = 0.0;
    run.trajectories()
        .map(|t| {
            total += v_star - t.total_reward();
            total
        })
        .collect()
}

/// Cumulative expected regret `sum_t (V*_1 - V^{pi_t}_1)` of the executed
/// policy snapshots. Nondecreasing by construction.
pub fn expected_regret_curve(run: &RunRecord, mdp: &TabularMdp, v_star: f64) -> Result<Vec<f64>> {
    let mut total = 0.0;
    run.episodes
        .iter()
        .enumerate()
        .map(|(t, e)| {
            let pi = e
                .policy
                .as_ref()
                .ok_or_else(|| Error::InvalidParams(format!("episode {t} has no policy snapshot")))?;
            total += (v_star - policy_value(mdp, &pi.to_stochastic())).max(0.0);
            Ok(total)
        })
        .collect()
}

/// Mean per-step reward of each episode on the raw reward scale.
pub fn average_reward_curve(run: &RunRecord) -> Vec<f64> {
    run.trajectories()
        .map(|t| {
            let raw: f64 = t.steps.iter().map(|s| run.reward_scale.to_raw(s.reward)).sum();
            raw / t.horizon().max(1) as f64
        })
        .collect()
}

/// Eigenvalues behind the linear coverage proxies at one point in time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EigenPoint {
    /// Largest eigenvalue of the full covariance.
    pub full: f64,
    /// `lambda_k` of the covariance projected on the offline subspace (rank `k`).
    pub off: f64,
    /// `lambda_{d-k}` of the covariance projected on the online subspace.
    pub on: f64,
}

impl EigenPoint {
    /// Inverse eigenvalues; zero eigenvalues give `inf`.
    pub fn inverse(&self) -> EigenPoint {
        let inv = |x: f64| if x > 1e-12 { 1.0 / x } else { f64::INFINITY };
        EigenPoint {
            full: inv(self.full),
            off: inv(self.off),
            on: inv(self.on),
        }
    }
}

/// Running second-moment matrix `(1/n) sum phi phi^T`.
#[derive(Debug, Clone)]
pub struct CovarianceTracker {
    sum: DMatrix<f64>,
    n: usize,
}

impl CovarianceTracker {
    pub fn new(dim: usize) -> Self {
        Self {
            sum: DMatrix::zeros(dim, dim),
            n: 0,
        }
    }

    pub fn push(&mut self, phi: &[f64]) {
        let nz: Vec<(usize, f64)> = phi.iter().copied().enumerate().filter(|(_, v)| *v != 0.0).collect();
        for &(i, vi) in &nz {
            for &(j, vj) in &nz {
                self.sum[(i, j)] += vi * vj;
            }
        }
        self.n += 1;
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn covariance(&self) -> DMatrix<f64> {
        &self.sum / self.n.max(1) as f64
    }

    /// Eigenvalues in decreasing order.
    pub fn eigenvalues(&self) -> Vec<f64> {
        sorted_eigenvalues(self.covariance())
    }

    pub fn point(&self, part: &SubspacePartition) -> Result<EigenPoint> {
        if self.n == 0 {
            return Err(Error::InvalidParams("covariance needs at least one sample".into()));
        }
        if part.dim() != self.sum.nrows() {
            return Err(Error::LengthMismatch {
                expected: self.sum.nrows(),
                found: part.dim(),
            });
        }
        let cov = self.covariance();
        let smallest = |b: &DMatrix<f64>| -> f64 {
            if b.ncols() == 0 {
                return 0.0;
            }
            let ev = sorted_eigenvalues(b.transpose() * &cov * b);
            ev[ev.len() - 1]
        };
        Ok(EigenPoint {
            full: sorted_eigenvalues(cov.clone())[0],
            off: smallest(part.off.basis()),
            on: smallest(part.on.basis()),
        })
    }
}

fn sorted_eigenvalues(m: DMatrix<f64>) -> Vec<f64> {
    let mut ev: Vec<f64> = SymmetricEigen::new(m).eigenvalues.iter().map(|x| x.max(0.0)).collect();
    ev.sort_by(|a, b| b.total_cmp(a));
    ev
}

/// Per-episode eigenvalue points of the running covariance.
///
/// `baseline` samples (the offline buffer of a hybrid learner) are included
/// before the first episode; each entry of `episodes` holds the features
/// collected in one episode.
pub fn covariance_eig_curves(
    baseline: &[Vec<f64>],
    episodes: &[Vec<Vec<f64>>],
    part: &SubspacePartition,
) -> Result<Vec<EigenPoint>> {
    if episodes.is_empty() {
        return Err(Error::InvalidParams("eigen curves need at least one episode".into()));
    }
    let mut tracker = CovarianceTracker::new(part.dim());
    baseline.iter().for_each(|phi| tracker.push(phi));
    episodes
        .iter()
        .map(|ep| {
            ep.iter().for_each(|phi| tracker.push(phi));
            tracker.point(part)
        })
        .collect()
}
