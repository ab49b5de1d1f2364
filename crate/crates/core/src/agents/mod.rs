//! Hybrid learners: online algorithms whose replay data starts with an
//! offline dataset.
//!
//! Every agent takes the offline [`Dataset`] as an ordinary argument. Passing
//! an empty dataset gives the standard online algorithm; there is no
//! separate code path.

mod golf;
mod lsvi;
mod ucbvi;

pub use golf::{
    beta_schedule, disc_golf_finite, ClassConstruction, ConfidenceSetTrace, DiscGolf, FiniteFunctionClass, GolfConfig, GolfEpisode,
};
pub use lsvi::{lsvi_ucb_hybrid, LsviConfig, LsviUcb};
pub use ucbvi::{ucbvi_hybrid, Ucbvi, UcbviConfig};

use serde::{Deserialize, Serialize};

use crate::env::{rollout, Environment, RewardScale};
use crate::error::{Error, Result};
use crate::mdp::{BehaviorPolicy, Dataset, DatasetSource, DeterministicPolicy, OptimalValues, StochasticPolicy, Step, Trajectory};
use crate::rng::SimRng;

/// Names under which agents are registered in experiment configs.
pub const AGENT_NAMES: [&str; 3] = ["ucbvi", "lsvi_ucb", "disc_golf"];

/// Which fixed policy generated the offline data.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BehaviorKind {
    Optimal,
    Uniform,
    Adversarial,
}

impl BehaviorKind {
    pub const ALL: [BehaviorKind; 3] = [BehaviorKind::Adversarial, BehaviorKind::Uniform, BehaviorKind::Optimal];

    pub fn name(self) -> &'static str {
        match self {
            BehaviorKind::Optimal => "optimal",
            BehaviorKind::Uniform => "uniform",
            BehaviorKind::Adversarial => "adversarial",
        }
    }
}

impl std::str::FromStr for BehaviorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL.into_iter().find(|k| k.name() == s).ok_or_else(|| Error::UnknownName {
            kind: "behavior policy",
            name: s.to_string(),
            known: "optimal, uniform, adversarial".into(),
        })
    }
}

/// Probability of playing the non-greedy action in the adversarial mixture.
pub const ADVERSARIAL_OPPOSITE: f64 = 0.6;

/// Behavior policy derived from `Q*`.
///
/// The adversarial policy plays the lowest-index non-greedy action with
/// probability 0.6 and a uniform action with probability 0.4.
pub fn make_behavior_policy(kind: BehaviorKind, q_star: &OptimalValues) -> StochasticPolicy {
    let greedy = q_star.greedy_policy();
    let (ns, na, nh) = (greedy.num_states(), greedy.num_actions(), greedy.horizon());
    match kind {
        BehaviorKind::Optimal => greedy.to_stochastic(),
        BehaviorKind::Uniform => StochasticPolicy::uniform(ns, na, nh),
        BehaviorKind::Adversarial => {
            let mut probs = vec![0.0; nh * ns * na];
            for h in 0..nh {
                for s in 0..ns {
                    let row = &mut probs[(h * ns + s) * na..(h * ns + s + 1) * na];
                    let best = greedy.action(h, s);
                    let opposite = (0..na).find(|&a| a != best).unwrap_or(best);
                    row.iter_mut().for_each(|p| *p = (1.0 - ADVERSARIAL_OPPOSITE) / na as f64);
                    row[opposite] += ADVERSARIAL_OPPOSITE;
                }
            }
            StochasticPolicy::from_raw(ns, na, probs)
        }
    }
}

/// Samples `n_episodes` trajectories from `env` under `policy`.
pub fn generate_offline_dataset<E, P>(env: &mut E, policy: &P, n_episodes: usize, rng: &mut SimRng) -> Dataset
where
    E: Environment + ?Sized,
    P: BehaviorPolicy + ?Sized,
{
    let trajectories = (0..n_episodes).map(|i| rollout(env, policy, i, rng)).collect();
    Dataset::new(DatasetSource::Offline, trajectories).expect("one environment yields one horizon")
}

/// Per-step replay buffers `D_h`: an immutable offline part followed by an
/// append-only online part.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplayState {
    offline: Vec<Vec<Step>>,
    online: Vec<Vec<Step>>,
}

impl ReplayState {
    pub fn new(horizon: usize, offline: &Dataset) -> Result<Self> {
        let mut off = vec![Vec::with_capacity(offline.len()); horizon];
        for t in offline.trajectories() {
            if t.horizon() != horizon {
                return Err(Error::LengthMismatch {
                    expected: horizon,
                    found: t.horizon(),
                });
            }
            for (h, step) in t.steps.iter().enumerate() {
                off[h].push(*step);
            }
        }
        Ok(Self {
            offline: off,
            online: vec![Vec::new(); horizon],
        })
    }

    pub fn horizon(&self) -> usize {
        self.offline.len()
    }

    /// Appends one tuple per step.
    pub fn push_episode(&mut self, trajectory: &Trajectory) {
        assert_eq!(trajectory.horizon(), self.horizon(), "trajectory length must equal the horizon");
        for (buf, step) in self.online.iter_mut().zip(&trajectory.steps) {
            buf.push(*step);
        }
    }

    /// `D_h^(t)` together with `D_off,h`, offline tuples first.
    pub fn at_step(&self, h: usize) -> impl Iterator<Item = &Step> + Clone {
        self.offline[h].iter().chain(&self.online[h])
    }

    pub fn len_at(&self, h: usize) -> usize {
        self.offline[h].len() + self.online[h].len()
    }

    pub fn offline(&self) -> &[Vec<Step>] {
        &self.offline
    }

    pub fn online(&self) -> &[Vec<Step>] {
        &self.online
    }
}

/// What happened in one online episode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRecord {
    pub trajectory: Trajectory,
    /// The greedy policy executed, when the state space is tabular.
    pub policy: Option<DeterministicPolicy>,
    /// The agent's own value estimate at the episode's first state.
    pub value_estimate: f64,
    /// Mean exploration bonus along the executed trajectory.
    pub mean_bonus: f64,
}

/// Trace of a full agent run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub agent: String,
    pub environment: String,
    pub seed: u64,
    pub n_off: usize,
    pub n_on: usize,
    pub reward_scale: RewardScale,
    pub episodes: Vec<EpisodeRecord>,
}

impl RunRecord {
    pub(crate) fn new(agent: &str, n_off: usize, n_on: usize, reward_scale: RewardScale) -> Self {
        Self {
            agent: agent.to_string(),
            environment: String::new(),
            seed: 0,
            n_off,
            n_on,
            reward_scale,
            episodes: Vec::with_capacity(n_on),
        }
    }

    pub fn with_labels(mut self, environment: &str, seed: u64) -> Self {
        self.environment = environment.to_string();
        self.seed = seed;
        self
    }

    pub fn trajectories(&self) -> impl Iterator<Item = &Trajectory> {
        self.episodes.iter().map(|e| &e.trajectory)
    }

    pub fn horizon(&self) -> usize {
        self.episodes.first().map_or(0, |e| e.trajectory.horizon())
    }
}
