use rand::Rng;
use serde::{Deserialize, Serialize};

use super::INPUT_TOL;
use crate::error::{Error, Result};
use crate::rng::{sample_index, SimRng};

/// Anything that can pick an action at step `h` in state `state`.
pub trait BehaviorPolicy: Sync {
    fn act(&self, h: usize, state: usize, rng: &mut SimRng) -> usize;
}

/// Greedy action table, `[h][s]`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DeterministicPolicy {
    num_states: usize,
    num_actions: usize,
    actions: Vec<usize>,
}

impl DeterministicPolicy {
    pub fn new(num_states: usize, num_actions: usize, actions: Vec<usize>) -> Result<Self> {
        if actions.len() % num_states.max(1) != 0 {
            return Err(Error::InvalidPolicy(format!(
                "{} actions is not a multiple of S = {num_states}",
                actions.len()
            )));
        }
        if let Some(i) = actions.iter().position(|&a| a >= num_actions) {
            return Err(Error::InvalidPolicy(format!(
                "action {} at (h={}, s={}) out of range 0..{num_actions}",
                actions[i],
                i / num_states,
                i % num_states
            )));
        }
        Ok(Self {
            num_states,
            num_actions,
            actions,
        })
    }

    pub fn constant(num_states: usize, num_actions: usize, horizon: usize, action: usize) -> Result<Self> {
        Self::new(num_states, num_actions, vec![action; num_states * horizon])
    }

    #[inline]
    pub fn action(&self, h: usize, s: usize) -> usize {
        self.actions[h * self.num_states + s]
    }

    pub fn horizon(&self) -> usize {
        self.actions.len() / self.num_states
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    pub fn to_stochastic(&self) -> StochasticPolicy {
        let mut probs = vec![0.0; self.actions.len() * self.num_actions];
        for (i, &a) in self.actions.iter().enumerate() {
            probs[i * self.num_actions + a] = 1.0;
        }
        StochasticPolicy {
            num_states: self.num_states,
            num_actions: self.num_actions,
            probs,
        }
    }

    /// All `A^(S*H)` deterministic policies, in lexicographic order. Only
    /// sensible for tiny MDPs.
    pub fn enumerate(num_states: usize, num_actions: usize, horizon: usize) -> impl Iterator<Item = Self> {
        let len = num_states * horizon;
        let total = (num_actions as u64).pow(len as u32);
        (0..total).map(move |mut code| {
            let mut actions = vec![0; len];
            for slot in actions.iter_mut() {
                *slot = (code % num_actions as u64) as usize;
                code /= num_actions as u64;
            }
            Self {
                num_states,
                num_actions,
                actions,
            }
        })
    }
}

impl BehaviorPolicy for DeterministicPolicy {
    fn act(&self, h: usize, state: usize, _rng: &mut SimRng) -> usize {
        self.action(h, state)
    }
}

/// Action distributions, `[h][s][a]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StochasticPolicy {
    num_states: usize,
    num_actions: usize,
    probs: Vec<f64>,
}

impl StochasticPolicy {
    pub fn new(num_states: usize, num_actions: usize, probs: Vec<f64>) -> Result<Self> {
        let row = num_states * num_actions;
        if row == 0 || probs.len() % row != 0 {
            return Err(Error::InvalidPolicy(format!(
                "{} probabilities is not a multiple of S*A = {row}",
                probs.len()
            )));
        }
        for (i, dist) in probs.chunks(num_actions).enumerate() {
            let (h, s) = (i / num_states, i % num_states);
            if dist.iter().any(|p| !p.is_finite() || *p < 0.0) {
                return Err(Error::InvalidPolicy(format!("negative probability at (h={h}, s={s})")));
            }
            let total: f64 = dist.iter().sum();
            if (total - 1.0).abs() > INPUT_TOL {
                return Err(Error::InvalidPolicy(format!("row (h={h}, s={s}) sums to {total}")));
            }
        }
        Ok(Self {
            num_states,
            num_actions,
            probs,
        })
    }

    pub fn uniform(num_states: usize, num_actions: usize, horizon: usize) -> Self {
        Self {
            num_states,
            num_actions,
            probs: vec![1.0 / num_actions as f64; num_states * num_actions * horizon],
        }
    }

    #[inline]
    pub fn probs(&self, h: usize, s: usize) -> &[f64] {
        let start = (h * self.num_states + s) * self.num_actions;
        &self.probs[start..start + self.num_actions]
    }

    pub fn horizon(&self) -> usize {
        self.probs.len() / (self.num_states * self.num_actions)
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    /// Pointwise mixture `sum_i weights[i] * policies[i]` of policies with
    /// identical shape.
    pub fn mixture(policies: &[&StochasticPolicy], weights: &[f64]) -> Result<Self> {
        let first = policies
            .first()
            .ok_or_else(|| Error::InvalidPolicy("empty mixture".into()))?;
        let mut probs = vec![0.0; first.probs.len()];
        for (p, &w) in policies.iter().zip(weights) {
            if p.probs.len() != probs.len() {
                return Err(Error::LengthMismatch {
                    expected: probs.len(),
                    found: p.probs.len(),
                });
            }
            for (acc, x) in probs.iter_mut().zip(&p.probs) {
                *acc += w * x;
            }
        }
        Self::new(first.num_states, first.num_actions, probs)
    }

    pub(crate) fn from_raw(num_states: usize, num_actions: usize, probs: Vec<f64>) -> Self {
        Self {
            num_states,
            num_actions,
            probs,
        }
    }
}

impl BehaviorPolicy for StochasticPolicy {
    fn act(&self, h: usize, state: usize, rng: &mut SimRng) -> usize {
        sample_index(self.probs(h, state), rng)
    }
}

/// Uniform random actions over an unbounded state space.
#[derive(Debug, Clone, Copy)]
pub struct UniformPolicy {
    pub num_actions: usize,
}

impl BehaviorPolicy for UniformPolicy {
    fn act(&self, _h: usize, _state: usize, rng: &mut SimRng) -> usize {
        rng.random_range(0..self.num_actions)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn enumeration_covers_every_policy_once() {
        let all: Vec<_> = DeterministicPolicy::enumerate(2, 2, 2).collect();
        assert_eq!(all.len(), 16);
        let mut seen = std::collections::HashSet::new();
        for p in &all {
            assert!(seen.insert(p.actions.clone()));
        }
    }

    #[test]
    fn rejects_malformed_rows() {
        assert!(StochasticPolicy::new(1, 2, vec![0.7, 0.2]).is_err());
        assert!(StochasticPolicy::new(1, 2, vec![1.2, -0.2]).is_err());
        assert!(DeterministicPolicy::new(2, 2, vec![0, 2]).is_err());
    }

    #[test]
    fn deterministic_embeds_as_point_masses() {
        let p = DeterministicPolicy::new(2, 3, vec![2, 0]).unwrap().to_stochastic();
        assert_eq!(p.probs(0, 0), &[0.0, 0.0, 1.0]);
        assert_eq!(p.probs(0, 1), &[1.0, 0.0, 0.0]);
    }
}
