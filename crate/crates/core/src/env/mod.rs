//! Environments: the forest-management simulator, mini-Tetris, random
//! tabular MDPs and block MDPs over observed contexts.

mod block;
mod features;
mod forest;
mod random;
mod tetris;

pub use block::{block_wrap, BlockEmission, BlockEnv, BlockParams};
pub use features::{gram_projector, svd_projector, FeatureMap, Projected, Projector, TabularOneHot};
pub use forest::{build_forest, Forest, ForestParams};
pub use random::build_random_tabular;
pub use tetris::{
    tetris_step, PieceShape, TetrisConfig, TetrisEnv, TetrisFeatures, TetrisOutcome, TetrisState,
};

use serde::{Deserialize, Serialize};

use crate::mdp::{BehaviorPolicy, Step, TabularMdp, Trajectory};
use crate::rng::{sample_index, SimRng};

/// Names under which environments are registered in experiment configs.
pub const ENV_NAMES: [&str; 4] = ["forest", "tetris", "random", "block"];

/// Affine map from agent-scale rewards in `[0, 1]` back to the raw reward
/// scale: `raw = offset + scale * reward`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RewardScale {
    pub offset: f64,
    pub scale: f64,
}

impl RewardScale {
    pub const IDENTITY: RewardScale = RewardScale {
        offset: 0.0,
        scale: 1.0,
    };

    #[inline]
    pub fn to_raw(&self, reward: f64) -> f64 {
        self.offset + self.scale * reward
    }
}

/// Result of one environment step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnvStep {
    pub next_state: usize,
    pub reward: f64,
}

/// An episodic environment with integer-coded states.
///
/// `step` receives the zero-based step index so that step-dependent rules
/// (the Tetris drop column) need no hidden counter.
pub trait Environment: Send {
    fn horizon(&self) -> usize;
    fn num_actions(&self) -> usize;
    /// Size of the state space when it is small enough to tabulate.
    fn num_states(&self) -> Option<usize>;
    fn reset(&mut self, rng: &mut SimRng) -> usize;
    fn step(&mut self, h: usize, action: usize, rng: &mut SimRng) -> EnvStep;
    fn reward_scale(&self) -> RewardScale {
        RewardScale::IDENTITY
    }
}

/// Runs one episode, asking `choose(h, state)` for each action.
pub fn run_episode<E, F>(env: &mut E, episode_index: usize, rng: &mut SimRng, mut choose: F) -> Trajectory
where
    E: Environment + ?Sized,
    F: FnMut(usize, usize, &mut SimRng) -> usize,
{
    let mut state = env.reset(rng);
    let steps = (0..env.horizon())
        .map(|h| {
            let action = choose(h, state, rng);
            let out = env.step(h, action, rng);
            let step = Step {
                state,
                action,
                reward: out.reward,
                next_state: out.next_state,
            };
            state = out.next_state;
            step
        })
        .collect();
    Trajectory { episode_index, steps }
}

/// Runs one episode under a fixed behavior policy.
pub fn rollout<E: Environment + ?Sized, P: BehaviorPolicy + ?Sized>(
    env: &mut E,
    policy: &P,
    episode_index: usize,
    rng: &mut SimRng,
) -> Trajectory {
    run_episode(env, episode_index, rng, |h, s, rng| policy.act(h, s, rng))
}

/// A [`TabularMdp`] as a stepping environment.
///
/// Uses the same draw order as [`crate::mdp::sample_episode`], so both
/// produce identical trajectories from identical generators.
#[derive(Debug, Clone)]
pub struct TabularEnv {
    mdp: TabularMdp,
    state: usize,
    scale: RewardScale,
}

impl TabularEnv {
    pub fn new(mdp: TabularMdp) -> Self {
        Self::with_scale(mdp, RewardScale::IDENTITY)
    }

    pub fn with_scale(mdp: TabularMdp, scale: RewardScale) -> Self {
        let state = mdp.initial_state();
        Self { mdp, state, scale }
    }

    pub fn mdp(&self) -> &TabularMdp {
        &self.mdp
    }
}

impl Environment for TabularEnv {
    fn horizon(&self) -> usize {
        self.mdp.horizon()
    }

    fn num_actions(&self) -> usize {
        self.mdp.num_actions()
    }

    fn num_states(&self) -> Option<usize> {
        Some(self.mdp.num_states())
    }

    fn reset(&mut self, _rng: &mut SimRng) -> usize {
        self.state = self.mdp.initial_state();
        self.state
    }

    fn step(&mut self, h: usize, action: usize, rng: &mut SimRng) -> EnvStep {
        let reward = self.mdp.reward(h, self.state, action);
        let next_state = sample_index(self.mdp.next_state_probs(h, self.state, action), rng);
        self.state = next_state;
        EnvStep { next_state, reward }
    }

    fn reward_scale(&self) -> RewardScale {
        self.scale
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mdp::{sample_episode, StochasticPolicy};
    use crate::rng::seeded;

    #[test]
    fn tabular_env_matches_sample_episode() {
        let mdp = build_random_tabular(5, 3, 2, 4, 0.0).unwrap();
        let pi = StochasticPolicy::uniform(3, 2, 4);
        let mut env = TabularEnv::new(mdp.clone());
        for seed in 0..20 {
            let a = sample_episode(&mdp, &pi, 0, &mut seeded(seed));
            let b = rollout(&mut env, &pi, 0, &mut seeded(seed));
            assert_eq!(a, b);
        }
    }
}
