use serde::{Deserialize, Serialize};

use crate::env::Projector;
use crate::error::{Error, Result};
use crate::mdp::OccupancyTensor;

/// Offline/online split of the `(h, s, a)` cells of a tabular problem.
///
/// The two sides may overlap but together must cover every cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Partition {
    num_states: usize,
    num_actions: usize,
    horizon: usize,
    off: Vec<bool>,
    on: Vec<bool>,
}

impl Partition {
    pub fn new(num_states: usize, num_actions: usize, horizon: usize, off: Vec<bool>, on: Vec<bool>) -> Result<Self> {
        let cells = num_states * num_actions * horizon;
        for side in [&off, &on] {
            if side.len() != cells {
                return Err(Error::LengthMismatch {
                    expected: cells,
                    found: side.len(),
                });
            }
        }
        if let Some(i) = (0..cells).find(|&i| !off[i] && !on[i]) {
            let (h, rest) = (i / (num_states * num_actions), i % (num_states * num_actions));
            return Err(Error::InvalidParams(format!(
                "partition does not cover (h={h}, s={}, a={})",
                rest / num_actions,
                rest % num_actions
            )));
        }
        Ok(Self {
            num_states,
            num_actions,
            horizon,
            off,
            on,
        })
    }

    /// `X_off = off`, `X_on` its complement.
    pub fn from_offline(num_states: usize, num_actions: usize, horizon: usize, off: Vec<bool>) -> Result<Self> {
        let on = off.iter().map(|b| !b).collect();
        Self::new(num_states, num_actions, horizon, off, on)
    }

    pub fn all_offline(num_states: usize, num_actions: usize, horizon: usize) -> Self {
        let cells = num_states * num_actions * horizon;
        Self::from_offline(num_states, num_actions, horizon, vec![true; cells]).expect("shape is consistent")
    }

    pub fn all_online(num_states: usize, num_actions: usize, horizon: usize) -> Self {
        let cells = num_states * num_actions * horizon;
        Self::from_offline(num_states, num_actions, horizon, vec![false; cells]).expect("shape is consistent")
    }

    #[inline]
    fn cell(&self, h: usize, s: usize, a: usize) -> usize {
        (h * self.num_states + s) * self.num_actions + a
    }

    pub fn is_offline(&self, h: usize, s: usize, a: usize) -> bool {
        self.off[self.cell(h, s, a)]
    }

    pub fn is_online(&self, h: usize, s: usize, a: usize) -> bool {
        self.on[self.cell(h, s, a)]
    }

    /// Offline membership flattened as `[h][s][a]`.
    pub fn offline_mask(&self) -> &[bool] {
        &self.off
    }

    pub fn online_mask(&self) -> &[bool] {
        &self.on
    }

    pub fn offline_size(&self) -> usize {
        self.off.iter().filter(|b| **b).count()
    }

    pub fn online_size(&self) -> usize {
        self.on.iter().filter(|b| **b).count()
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }
}

/// `X_off = {(h, s, a) : mu_h(s, a) >= threshold}` and `X_on` its complement.
/// The default threshold is `1 / (S A)`.
pub fn partition_from_occupancy(mu: &OccupancyTensor, threshold: Option<f64>) -> Partition {
    let (ns, na, nh) = (mu.num_states(), mu.num_actions(), mu.horizon());
    let threshold = threshold.unwrap_or(1.0 / (ns * na) as f64);
    let off = mu.density().iter().map(|&m| m >= threshold).collect();
    Partition::from_offline(ns, na, nh, off).expect("shape comes from the occupancy")
}

/// Offline/online split of a feature space into two subspaces.
#[derive(Debug, Clone, PartialEq)]
pub struct SubspacePartition {
    pub off: Projector,
    pub on: Projector,
}

impl SubspacePartition {
    pub fn new(off: Projector, on: Projector) -> Result<Self> {
        if off.ambient_dim() != on.ambient_dim() {
            return Err(Error::LengthMismatch {
                expected: off.ambient_dim(),
                found: on.ambient_dim(),
            });
        }
        Ok(Self { off, on })
    }

    /// Splits `R^dim` into the first `k` coordinates and the rest.
    pub fn coordinates(dim: usize, k: usize) -> Result<Self> {
        Projector::coordinate(dim, 0..dim).split(k).map(|(off, on)| Self { off, on })
    }

    pub fn dim(&self) -> usize {
        self.off.ambient_dim()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_occupancy_is_all_offline() {
        let mu = OccupancyTensor::new(2, 3, 2, vec![1.0 / 6.0; 12]).unwrap();
        let p = partition_from_occupancy(&mu, None);
        assert_eq!(p.offline_size(), 12);
        assert_eq!(p.online_size(), 0);
    }

    #[test]
    fn point_mass_keeps_one_cell_per_step() {
        let mut d = vec![0.0; 12];
        d[1] = 1.0;
        d[6 + 4] = 1.0;
        let mu = OccupancyTensor::new(2, 3, 2, d).unwrap();
        let p = partition_from_occupancy(&mu, None);
        assert_eq!(p.offline_size(), 2);
        assert!(p.is_offline(0, 0, 1) && p.is_offline(1, 1, 1));
        assert!(!p.is_online(0, 0, 1) && p.is_online(0, 0, 0));
    }

    #[test]
    fn rejects_uncovered_cells() {
        let err = Partition::new(1, 2, 1, vec![true, false], vec![true, false]).unwrap_err();
        assert!(err.to_string().contains("a=1"));
    }

    #[test]
    fn coordinate_subspaces() {
        let p = SubspacePartition::coordinates(6, 2).unwrap();
        assert_eq!((p.off.rank(), p.on.rank(), p.dim()), (2, 4, 6));
        assert!(SubspacePartition::coordinates(6, 7).is_err());
    }
}
