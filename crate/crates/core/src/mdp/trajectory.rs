use serde::{Deserialize, Serialize};

use super::{BehaviorPolicy, TabularMdp};
use crate::error::{Error, Result};
use crate::rng::{sample_index, SimRng};

/// One transition `(s_h, a_h, r_h, s_{h+1})`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Step {
    pub state: usize,
    pub action: usize,
    pub reward: f64,
    pub next_state: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub episode_index: usize,
    pub steps: Vec<Step>,
}

impl Trajectory {
    pub fn horizon(&self) -> usize {
        self.steps.len()
    }

    pub fn total_reward(&self) -> f64 {
        self.steps.iter().map(|s| s.reward).sum()
    }

    /// Checks the step chaining and the reward range.
    pub fn validate(&self, horizon: usize) -> Result<()> {
        if self.steps.len() != horizon {
            return Err(Error::LengthMismatch {
                expected: horizon,
                found: self.steps.len(),
            });
        }
        for (h, pair) in self.steps.windows(2).enumerate() {
            if pair[0].next_state != pair[1].state {
                return Err(Error::InvalidParams(format!(
                    "episode {}: step {h} ends in {} but step {} starts in {}",
                    self.episode_index,
                    pair[0].next_state,
                    h + 1,
                    pair[1].state
                )));
            }
        }
        if let Some(step) = self.steps.iter().find(|s| !(0.0..=1.0).contains(&s.reward)) {
            return Err(Error::InvalidParams(format!(
                "episode {}: reward {} outside [0, 1]",
                self.episode_index, step.reward
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DatasetSource {
    Offline,
    Online,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub source: DatasetSource,
    trajectories: Vec<Trajectory>,
}

impl Dataset {
    pub fn new(source: DatasetSource, trajectories: Vec<Trajectory>) -> Result<Self> {
        if let Some(first) = trajectories.first() {
            let h = first.horizon();
            if let Some(t) = trajectories.iter().find(|t| t.horizon() != h) {
                return Err(Error::LengthMismatch {
                    expected: h,
                    found: t.horizon(),
                });
            }
        }
        Ok(Self { source, trajectories })
    }

    pub fn empty(source: DatasetSource) -> Self {
        Self {
            source,
            trajectories: Vec::new(),
        }
    }

    pub fn trajectories(&self) -> &[Trajectory] {
        &self.trajectories
    }

    pub fn len(&self) -> usize {
        self.trajectories.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trajectories.is_empty()
    }

    pub fn num_transitions(&self) -> usize {
        self.trajectories.iter().map(Trajectory::horizon).sum()
    }

    /// All transitions taken at step `h`.
    pub fn at_step(&self, h: usize) -> impl Iterator<Item = &Step> {
        self.trajectories.iter().filter_map(move |t| t.steps.get(h))
    }
}

/// Samples one episode of `mdp` under `policy`.
///
/// Per step the policy draws first, then the next state; the draw order is
/// part of the reproducibility contract.
pub fn sample_episode<P: BehaviorPolicy + ?Sized>(
    mdp: &TabularMdp,
    policy: &P,
    episode_index: usize,
    rng: &mut SimRng,
) -> Trajectory {
    let mut state = mdp.initial_state();
    let steps = (0..mdp.horizon())
        .map(|h| {
            let action = policy.act(h, state, rng);
            let next_state = sample_index(mdp.next_state_probs(h, state, action), rng);
            let step = Step {
                state,
                action,
                reward: mdp.reward(h, state, action),
                next_state,
            };
            state = next_state;
            step
        })
        .collect();
    Trajectory { episode_index, steps }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mdp::tests::two_state_chain;
    use crate::mdp::DeterministicPolicy;
    use crate::rng::seeded;

    #[test]
    fn deterministic_episode_ignores_seed() {
        let mdp = two_state_chain();
        let pi = DeterministicPolicy::constant(2, 2, 2, 0).unwrap();
        let a = sample_episode(&mdp, &pi, 0, &mut seeded(1));
        let b = sample_episode(&mdp, &pi, 0, &mut seeded(99));
        assert_eq!(a, b);
        assert_eq!(a.total_reward(), 1.0);
        a.validate(2).unwrap();
    }

    #[test]
    fn dataset_rejects_mixed_horizons() {
        let t = |n| Trajectory {
            episode_index: 0,
            steps: vec![
                Step {
                    state: 0,
                    action: 0,
                    reward: 0.0,
                    next_state: 0
                };
                n
            ],
        };
        assert!(Dataset::new(DatasetSource::Offline, vec![t(2), t(3)]).is_err());
        let d = Dataset::new(DatasetSource::Offline, vec![t(2), t(2)]).unwrap();
        assert_eq!(d.num_transitions(), 4);
        assert_eq!(d.at_step(1).count(), 2);
    }

    #[test]
    fn broken_chain_is_rejected() {
        let t = Trajectory {
            episode_index: 3,
            steps: vec![
                Step {
                    state: 0,
                    action: 0,
                    reward: 0.0,
                    next_state: 1,
                },
                Step {
                    state: 0,
                    action: 0,
                    reward: 0.0,
                    next_state: 1,
                },
            ],
        };
        assert!(t.validate(2).is_err());
    }
}
