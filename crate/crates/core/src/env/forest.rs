use serde::{Deserialize, Serialize};

use super::RewardScale;
use crate::error::{Error, Result};
use crate::mdp::TabularMdp;

pub const WAIT: usize = 0;
pub const CUT: usize = 1;

/// Forest-management constants. States are forest ages `0..num_states`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ForestParams {
    pub num_states: usize,
    pub horizon: usize,
    pub fire_probability: f64,
    /// Raw reward for waiting when the forest is at the oldest age.
    pub wait_reward_at_max: f64,
    /// Raw reward for cutting, indexed by age. Empty means the default
    /// schedule: 0 at age 0, 2 at the oldest age, 1 in between.
    pub cut_rewards: Vec<f64>,
}

impl Default for ForestParams {
    fn default() -> Self {
        Self {
            num_states: 4,
            horizon: 20,
            fire_probability: 0.1,
            wait_reward_at_max: 4.0,
            cut_rewards: Vec::new(),
        }
    }
}

impl ForestParams {
    pub fn resolved_cut_rewards(&self) -> Vec<f64> {
        if !self.cut_rewards.is_empty() {
            return self.cut_rewards.clone();
        }
        (0..self.num_states)
            .map(|age| match age {
                0 => 0.0,
                a if a + 1 == self.num_states => 2.0,
                _ => 1.0,
            })
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_states < 2 || self.horizon == 0 {
            return Err(Error::InvalidParams(format!(
                "forest needs at least 2 states and a positive horizon (got S={}, H={})",
                self.num_states, self.horizon
            )));
        }
        if !(0.0..=1.0).contains(&self.fire_probability) {
            return Err(Error::InvalidParams(format!(
                "fire_probability {} outside [0, 1]",
                self.fire_probability
            )));
        }
        let cut = self.resolved_cut_rewards();
        if cut.len() != self.num_states {
            return Err(Error::InvalidParams(format!(
                "cut_rewards has {} entries for {} states",
                cut.len(),
                self.num_states
            )));
        }
        if cut.iter().chain([&self.wait_reward_at_max]).any(|r| !r.is_finite() || *r < 0.0) {
            return Err(Error::InvalidParams("forest rewards must be finite and nonnegative".into()));
        }
        Ok(())
    }
}

/// The forest MDP with rewards divided by the largest raw reward.
#[derive(Debug, Clone)]
pub struct Forest {
    pub mdp: TabularMdp,
    pub reward_scale: RewardScale,
}

/// Builds the forest-management MDP.
///
/// Rewards depend on the age at decision time; the fire then resolves on top
/// of the action's own transition, so cutting always lands at age 0 and
/// waiting lands at age 0 with the fire probability and one year older
/// (capped) otherwise.
pub fn build_forest(params: &ForestParams) -> Result<Forest> {
    params.validate()?;
    let (ns, na, nh) = (params.num_states, 2, params.horizon);
    let oldest = ns - 1;
    let cut = params.resolved_cut_rewards();
    let raw_max = cut
        .iter()
        .copied()
        .chain([params.wait_reward_at_max])
        .fold(0.0, f64::max);
    let scale = if raw_max > 0.0 { raw_max } else { 1.0 };

    let mut transition = vec![0.0; nh * ns * na * ns];
    let mut reward = vec![0.0; nh * ns * na];
    for h in 0..nh {
        for s in 0..ns {
            let base = (h * ns + s) * na;
            let wait_row = &mut transition[(base + WAIT) * ns..(base + WAIT + 1) * ns];
            wait_row[0] += params.fire_probability;
            wait_row[(s + 1).min(oldest)] += 1.0 - params.fire_probability;
            transition[(base + CUT) * ns] = 1.0;

            reward[base + WAIT] = if s == oldest { params.wait_reward_at_max / scale } else { 0.0 };
            reward[base + CUT] = cut[s] / scale;
        }
    }
    let mdp = TabularMdp::new(ns, na, nh, 0, transition, reward)?;
    Ok(Forest {
        mdp,
        reward_scale: RewardScale { offset: 0.0, scale },
    })
}
