use serde::{Deserialize, Serialize};

use super::{EnvStep, Environment, RewardScale};
use crate::error::{Error, Result};
use crate::mdp::{TabularMdp, INPUT_TOL};
use crate::rng::{sample_index, SimRng};

/// Block structure: each latent state emits observed contexts from its own
/// block, so the decoder recovers the latent state from a single context.
#[derive(Debug, Clone)]
pub struct BlockEmission {
    latent: TabularMdp,
    /// `emission[u][x] = q(x | u)`.
    emission: Vec<Vec<f64>>,
    decoder: Vec<usize>,
}

impl BlockEmission {
    pub fn new(latent: TabularMdp, emission: Vec<Vec<f64>>, decoder: Vec<usize>) -> Result<Self> {
        if emission.len() != latent.num_states() {
            return Err(Error::LengthMismatch {
                expected: latent.num_states(),
                found: emission.len(),
            });
        }
        let contexts = decoder.len();
        for (u, row) in emission.iter().enumerate() {
            if row.len() != contexts {
                return Err(Error::LengthMismatch {
                    expected: contexts,
                    found: row.len(),
                });
            }
            let total: f64 = row.iter().sum();
            if row.iter().any(|p| *p < 0.0) || (total - 1.0).abs() > INPUT_TOL {
                return Err(Error::InvalidParams(format!("emission row for latent state {u} is not a distribution")));
            }
            if let Some(x) = (0..contexts).find(|&x| row[x] > 0.0 && decoder[x] != u) {
                return Err(Error::InvalidParams(format!(
                    "context {x} is emitted by latent state {u} but decodes to {}",
                    decoder[x]
                )));
            }
        }
        Ok(Self {
            latent,
            emission,
            decoder,
        })
    }

    /// Every latent state emits `per_state` contexts of its own, uniformly.
    /// Contexts of state `u` are `u * per_state .. (u + 1) * per_state`.
    pub fn uniform(latent: TabularMdp, per_state: usize) -> Result<Self> {
        if per_state == 0 {
            return Err(Error::InvalidParams("each latent state needs at least one context".into()));
        }
        let u_count = latent.num_states();
        let contexts = u_count * per_state;
        let emission = (0..u_count)
            .map(|u| {
                (0..contexts)
                    .map(|x| if x / per_state == u { 1.0 / per_state as f64 } else { 0.0 })
                    .collect()
            })
            .collect();
        let decoder = (0..contexts).map(|x| x / per_state).collect();
        Self::new(latent, emission, decoder)
    }

    pub fn latent(&self) -> &TabularMdp {
        &self.latent
    }

    pub fn num_contexts(&self) -> usize {
        self.decoder.len()
    }

    pub fn decode(&self, context: usize) -> usize {
        self.decoder[context]
    }

    pub fn emission(&self, latent_state: usize) -> &[f64] {
        &self.emission[latent_state]
    }

    /// Draws a context for `u`. Point-mass rows consume no randomness.
    pub fn emit(&self, u: usize, rng: &mut SimRng) -> usize {
        let row = &self.emission[u];
        let mut support = row.iter().enumerate().filter(|(_, p)| **p > 0.0);
        match (support.next(), support.next()) {
            (Some((x, _)), None) => x,
            _ => sample_index(row, rng),
        }
    }
}

/// Episodic environment over observed contexts driven by latent dynamics.
#[derive(Debug, Clone)]
pub struct BlockEnv {
    emission: BlockEmission,
    latent_state: usize,
    scale: RewardScale,
}

/// Wraps a block emission as a stepping environment.
pub fn block_wrap(emission: BlockEmission) -> BlockEnv {
    let latent_state = emission.latent.initial_state();
    BlockEnv {
        emission,
        latent_state,
        scale: RewardScale::IDENTITY,
    }
}

impl BlockEnv {
    /// The decoder, for diagnostics only; agents never see it.
    pub fn emission(&self) -> &BlockEmission {
        &self.emission
    }
}

impl Environment for BlockEnv {
    fn horizon(&self) -> usize {
        self.emission.latent.horizon()
    }

    fn num_actions(&self) -> usize {
        self.emission.latent.num_actions()
    }

    fn num_states(&self) -> Option<usize> {
        Some(self.emission.num_contexts())
    }

    fn reset(&mut self, rng: &mut SimRng) -> usize {
        self.latent_state = self.emission.latent.initial_state();
        self.emission.emit(self.latent_state, rng)
    }

    fn step(&mut self, h: usize, action: usize, rng: &mut SimRng) -> EnvStep {
        let latent = &self.emission.latent;
        let reward = latent.reward(h, self.latent_state, action);
        self.latent_state = sample_index(latent.next_state_probs(h, self.latent_state, action), rng);
        let next_state = self.emission.emit(self.latent_state, rng);
        EnvStep { next_state, reward }
    }

    fn reward_scale(&self) -> RewardScale {
        self.scale
    }
}

/// Serializable description of a block MDP built on a random latent MDP.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BlockParams {
    pub latent_states: usize,
    pub num_actions: usize,
    pub horizon: usize,
    pub contexts_per_state: usize,
    pub sparsity: f64,
    pub mdp_seed: u64,
}

impl Default for BlockParams {
    fn default() -> Self {
        Self {
            latent_states: 3,
            num_actions: 2,
            horizon: 5,
            contexts_per_state: 3,
            sparsity: 0.5,
            mdp_seed: 0,
        }
    }
}
