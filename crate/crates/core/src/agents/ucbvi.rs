use serde::{Deserialize, Serialize};

use super::{EpisodeRecord, RunRecord};
use crate::env::{run_episode, Environment};
use crate::error::{Error, Result};
use crate::mdp::{argmax, Dataset, DeterministicPolicy, Trajectory};
use crate::rng::SimRng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct UcbviConfig {
    pub bonus_scale: f64,
    pub delta: f64,
    /// Value never-visited pairs at `H` instead of at the bonus for one visit.
    pub optimistic_init: bool,
}

impl Default for UcbviConfig {
    fn default() -> Self {
        Self {
            bonus_scale: 1.0,
            delta: 0.1,
            optimistic_init: false,
        }
    }
}

/// Model-based optimistic value iteration with Hoeffding bonuses.
///
/// Unvisited pairs have an empty empirical model (zero reward, no next-state
/// mass), so their value is the bonus at count one, clipped to `H`, unless
/// `optimistic_init` pins them at `H`.
#[derive(Debug, Clone)]
pub struct Ucbvi {
    num_states: usize,
    num_actions: usize,
    horizon: usize,
    bonus_scale: f64,
    optimistic_init: bool,
    log_term: f64,
    counts: Vec<u64>,
    next_counts: Vec<u64>,
    reward_sums: Vec<f64>,
    q: Vec<f64>,
    v: Vec<f64>,
}

impl Ucbvi {
    /// `total_episodes` is `N = N_off + N_on`, used inside the log term.
    pub fn new(num_states: usize, num_actions: usize, horizon: usize, total_episodes: usize, config: &UcbviConfig) -> Result<Self> {
        if !(config.delta > 0.0 && config.delta < 1.0) || config.bonus_scale < 0.0 {
            return Err(Error::InvalidParams(format!(
                "UCBVI needs delta in (0, 1) and a nonnegative bonus scale (got {config:?})"
            )));
        }
        let cells = horizon * num_states * num_actions;
        let log_term = ((num_states * num_actions * horizon * total_episodes.max(1)) as f64 / config.delta).ln();
        Ok(Self {
            num_states,
            num_actions,
            horizon,
            bonus_scale: config.bonus_scale,
            optimistic_init: config.optimistic_init,
            log_term,
            counts: vec![0; cells],
            next_counts: vec![0; cells * num_states],
            reward_sums: vec![0.0; cells],
            q: vec![0.0; cells],
            v: vec![0.0; (horizon + 1) * num_states],
        })
    }

    #[inline]
    fn cell(&self, h: usize, s: usize, a: usize) -> usize {
        (h * self.num_states + s) * self.num_actions + a
    }

    pub fn count(&self, h: usize, s: usize, a: usize) -> u64 {
        self.counts[self.cell(h, s, a)]
    }

    pub fn bonus(&self, count: u64) -> f64 {
        self.bonus_scale * self.horizon as f64 * (self.log_term / count.max(1) as f64).sqrt()
    }

    /// Adds one trajectory's transitions to the counts.
    pub fn observe(&mut self, trajectory: &Trajectory) {
        for (h, step) in trajectory.steps.iter().enumerate() {
            let c = self.cell(h, step.state, step.action);
            self.counts[c] += 1;
            self.next_counts[c * self.num_states + step.next_state] += 1;
            self.reward_sums[c] += step.reward;
        }
    }

    /// Optimistic backward induction; returns the greedy policy.
    pub fn plan(&mut self) -> DeterministicPolicy {
        let (ns, na, nh) = (self.num_states, self.num_actions, self.horizon);
        let cap = nh as f64;
        let mut actions = vec![0; nh * ns];
        self.v[nh * ns..].fill(0.0);
        for h in (0..nh).rev() {
            for s in 0..ns {
                for a in 0..na {
                    let c = self.cell(h, s, a);
                    let n = self.counts[c];
                    let mut value = self.bonus(n);
                    if n == 0 && self.optimistic_init {
                        value = cap;
                    } else if n > 0 {
                        let inv = 1.0 / n as f64;
                        let next = &self.next_counts[c * ns..(c + 1) * ns];
                        let expected: f64 = next
                            .iter()
                            .zip(&self.v[(h + 1) * ns..(h + 2) * ns])
                            .map(|(&k, v)| k as f64 * v)
                            .sum();
                        value += self.reward_sums[c] * inv + expected * inv;
                    }
                    self.q[c] = value.clamp(0.0, cap);
                }
                let row = &self.q[self.cell(h, s, 0)..self.cell(h, s, 0) + na];
                let best = argmax(row);
                actions[h * ns + s] = best;
                self.v[h * ns + s] = row[best];
            }
        }
        DeterministicPolicy::new(ns, na, actions).expect("argmax is in range")
    }

    pub fn q(&self, h: usize, s: usize, a: usize) -> f64 {
        self.q[self.cell(h, s, a)]
    }

    pub fn value(&self, h: usize, s: usize) -> f64 {
        self.v[h * self.num_states + s]
    }
}

/// Warm-started UCBVI: counts start from the offline dataset, then
/// `n_on` optimistic episodes are played in `env`.
pub fn ucbvi_hybrid<E: Environment + ?Sized>(
    env: &mut E,
    offline: &Dataset,
    n_on: usize,
    config: &UcbviConfig,
    rng: &mut SimRng,
) -> Result<RunRecord> {
    let num_states = env
        .num_states()
        .ok_or_else(|| Error::InvalidParams("UCBVI needs a tabular environment".into()))?;
    let horizon = env.horizon();
    let mut agent = Ucbvi::new(num_states, env.num_actions(), horizon, offline.len() + n_on, config)?;
    for t in offline.trajectories() {
        if t.horizon() != horizon {
            return Err(Error::LengthMismatch {
                expected: horizon,
                found: t.horizon(),
            });
        }
        agent.observe(t);
    }

    let mut record = RunRecord::new("ucbvi", offline.len(), n_on, env.reward_scale());
    for episode in 0..n_on {
        let policy = agent.plan();
        let trajectory = run_episode(env, episode, rng, |h, s, _| policy.action(h, s));
        let first = trajectory.steps[0].state;
        let mean_bonus = trajectory
            .steps
            .iter()
            .enumerate()
            .map(|(h, st)| agent.bonus(agent.count(h, st.state, st.action)))
            .sum::<f64>()
            / horizon as f64;
        let value_estimate = agent.value(0, first);
        agent.observe(&trajectory);
        record.episodes.push(EpisodeRecord {
            trajectory,
            policy: Some(policy),
            value_estimate,
            mean_bonus,
        });
    }
    Ok(record)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agents::{generate_offline_dataset, make_behavior_policy, BehaviorKind};
    use crate::env::{build_forest, ForestParams, TabularEnv};
    use crate::mdp::{optimal_values, DatasetSource, StochasticPolicy};
    use crate::rng::seeded;

    fn forest_env() -> TabularEnv {
        TabularEnv::new(build_forest(&ForestParams::default()).unwrap().mdp)
    }

    #[test]
    fn huge_bonus_means_tie_break_policy() {
        let mut env = forest_env();
        let config = UcbviConfig {
            bonus_scale: 1e6,
            ..Default::default()
        };
        let run = ucbvi_hybrid(&mut env, &Dataset::empty(DatasetSource::Offline), 1, &config, &mut seeded(0)).unwrap();
        let first = run.episodes[0].policy.as_ref().unwrap();
        assert!((0..20).all(|h| (0..4).all(|s| first.action(h, s) == 0)));
        assert_eq!(run.episodes[0].value_estimate, 20.0);
    }

    #[test]
    fn optimistic_init_prefers_unvisited_pairs() {
        let mut env = forest_env();
        let opt = optimal_values(env.mdp());
        let behavior = make_behavior_policy(BehaviorKind::Optimal, &opt);
        let offline = generate_offline_dataset(&mut env, &behavior, 50, &mut seeded(3));
        let mut agent = Ucbvi::new(4, 2, 20, 51, &UcbviConfig { bonus_scale: 0.0, delta: 0.1, optimistic_init: true }).unwrap();
        offline.trajectories().iter().for_each(|t| agent.observe(t));
        agent.plan();
        for h in 0..20 {
            for s in 0..4 {
                for a in 0..2 {
                    if agent.count(h, s, a) == 0 {
                        assert_eq!(agent.q(h, s, a), 20.0);
                    } else {
                        assert!(agent.q(h, s, a) <= 20.0);
                    }
                }
            }
        }
        // Waiting at age 3 on the last step is visited and worth exactly its reward.
        assert!(agent.count(19, 3, 0) > 0);
        assert_eq!(agent.q(19, 3, 0), 1.0);
    }

    #[test]
    fn counts_are_conserved() {
        let mut env = forest_env();
        let behavior = StochasticPolicy::uniform(4, 2, 20);
        let offline = generate_offline_dataset(&mut env, &behavior, 7, &mut seeded(1));
        let mut agent = Ucbvi::new(4, 2, 20, 17, &UcbviConfig::default()).unwrap();
        offline.trajectories().iter().for_each(|t| agent.observe(t));
        let mut rng = seeded(2);
        for t in 1..=10 {
            let pi = agent.plan();
            let traj = run_episode(&mut env, t, &mut rng, |h, s, _| pi.action(h, s));
            agent.observe(&traj);
            for h in 0..20 {
                let total: u64 = (0..4).flat_map(|s| (0..2).map(move |a| (s, a))).map(|(s, a)| agent.count(h, s, a)).sum();
                assert_eq!(total, 7 + t as u64);
            }
        }
    }

    #[test]
    fn large_optimal_dataset_recovers_optimal_value() {
        let mut env = forest_env();
        let mdp = env.mdp().clone();
        let opt = optimal_values(&mdp);
        let behavior = make_behavior_policy(BehaviorKind::Optimal, &opt);
        let offline = generate_offline_dataset(&mut env, &behavior, 100_000, &mut seeded(5));
        let config = UcbviConfig {
            bonus_scale: 0.0,
            ..Default::default()
        };
        let run = ucbvi_hybrid(&mut env, &offline, 2, &config, &mut seeded(6)).unwrap();
        let v_star = opt.v(0, 0);
        assert!((run.episodes[0].value_estimate - v_star).abs() < 0.05);
        // The greedy policy stays on the behavior support along the run.
        let greedy = opt.greedy_policy();
        for step in run.episodes[0].trajectory.steps.iter().enumerate() {
            assert_eq!(step.1.action, greedy.action(step.0, step.1.state));
        }
    }

}
