use std::collections::HashMap;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{EpisodeRecord, RunRecord};
use crate::env::{run_episode, Environment, FeatureMap};
use crate::error::{Error, Result};
use crate::mdp::{argmax, Dataset, Trajectory};
use crate::rng::SimRng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LsviConfig {
    /// Ridge regularisation `lambda`.
    pub lambda: f64,
    /// Elliptical bonus coefficient `beta_lin`.
    pub beta: f64,
}

impl Default for LsviConfig {
    fn default() -> Self {
        Self { lambda: 1.0, beta: 1.0 }
    }
}

/// Feature vector stored by its nonzero entries.
#[derive(Debug, Clone)]
struct SparseFeature {
    idx: Vec<usize>,
    val: Vec<f64>,
}

impl SparseFeature {
    fn from_dense(v: &[f64]) -> Self {
        let (idx, val) = v.iter().enumerate().filter(|(_, x)| **x != 0.0).map(|(i, x)| (i, *x)).unzip();
        Self { idx, val }
    }

    fn dot(&self, w: &DVector<f64>) -> f64 {
        self.idx.iter().zip(&self.val).map(|(&i, v)| w[i] * v).sum()
    }

    /// `M phi` for symmetric `M`.
    fn left_mul(&self, m: &DMatrix<f64>) -> DVector<f64> {
        let mut out = DVector::zeros(m.nrows());
        for (&i, &v) in self.idx.iter().zip(&self.val) {
            out.axpy(v, &m.column(i), 1.0);
        }
        out
    }

    /// `phi^T M phi`.
    fn quad(&self, m: &DMatrix<f64>) -> f64 {
        let mut acc = 0.0;
        for (&i, &vi) in self.idx.iter().zip(&self.val) {
            for (&j, &vj) in self.idx.iter().zip(&self.val) {
                acc += vi * vj * m[(i, j)];
            }
        }
        acc
    }

    fn add_outer(&self, m: &mut DMatrix<f64>) {
        for (&i, &vi) in self.idx.iter().zip(&self.val) {
            for (&j, &vj) in self.idx.iter().zip(&self.val) {
                m[(i, j)] += vi * vj;
            }
        }
    }
}

#[derive(Debug, Clone)]
struct Sample {
    feature: usize,
    reward: f64,
    /// Features of `(s', a')` for every `a'`; empty at the last step.
    next: Vec<usize>,
}

/// LSVI-UCB over an arbitrary feature map.
///
/// Features are cached by [`FeatureMap::key`]. Gram matrices and their
/// inverses are updated incrementally as data arrives; weights are re-solved
/// from the full buffer at every [`LsviUcb::plan`].
pub struct LsviUcb<'f, F: FeatureMap + ?Sized> {
    features: &'f F,
    horizon: usize,
    num_actions: usize,
    lambda: f64,
    beta: f64,
    weight_bound: f64,
    cache: HashMap<u64, usize>,
    table: Vec<SparseFeature>,
    grams: Vec<DMatrix<f64>>,
    inverses: Vec<DMatrix<f64>>,
    weights: Vec<DVector<f64>>,
    buffers: Vec<Vec<Sample>>,
    memo: Vec<Vec<f64>>,
}

impl<'f, F: FeatureMap + ?Sized> LsviUcb<'f, F> {
    pub fn new(features: &'f F, horizon: usize, num_actions: usize, config: &LsviConfig) -> Result<Self> {
        if config.lambda <= 0.0 || config.beta < 0.0 {
            return Err(Error::InvalidParams(format!(
                "LSVI-UCB needs lambda > 0 and beta >= 0 (got {config:?})"
            )));
        }
        let d = features.dim();
        let ridge = DMatrix::identity(d, d) * config.lambda;
        Ok(Self {
            features,
            horizon,
            num_actions,
            lambda: config.lambda,
            beta: config.beta,
            weight_bound: 2.0 * horizon as f64 * (d as f64).sqrt(),
            cache: HashMap::new(),
            table: Vec::new(),
            grams: vec![ridge.clone(); horizon],
            inverses: vec![DMatrix::identity(d, d) / config.lambda; horizon],
            weights: vec![DVector::zeros(d); horizon],
            buffers: vec![Vec::new(); horizon],
            memo: vec![Vec::new(); horizon],
        })
    }

    fn feature_index(&mut self, state: usize, action: usize) -> usize {
        let key = self.features.key(state, action);
        if let Some(&i) = self.cache.get(&key) {
            return i;
        }
        let i = self.table.len();
        self.table.push(SparseFeature::from_dense(&self.features.embed(state, action)));
        self.cache.insert(key, i);
        i
    }

    /// Adds a trajectory to the buffers and the Gram matrices.
    pub fn observe(&mut self, trajectory: &Trajectory) {
        for (h, step) in trajectory.steps.iter().enumerate() {
            let feature = self.feature_index(step.state, step.action);
            let next = if h + 1 < self.horizon {
                (0..self.num_actions).map(|a| self.feature_index(step.next_state, a)).collect()
            } else {
                Vec::new()
            };
            let phi = &self.table[feature];
            phi.add_outer(&mut self.grams[h]);
            // Sherman-Morrison rank-one update.
            let u = phi.left_mul(&self.inverses[h]);
            let denom = 1.0 + phi.dot(&u);
            self.inverses[h].ger(-1.0 / denom, &u, &u, 1.0);
            self.buffers[h].push(Sample {
                feature,
                reward: step.reward,
                next,
            });
        }
    }

    /// Capped optimistic value `min(max(w.phi + beta ||phi||_{Lambda^-1}, 0), H)`,
    /// together with the bonus term.
    fn evaluate(&self, h: usize, feature: usize) -> (f64, f64) {
        let phi = &self.table[feature];
        let bonus = self.beta * phi.quad(&self.inverses[h]).max(0.0).sqrt();
        let q = (phi.dot(&self.weights[h]) + bonus).clamp(0.0, self.horizon as f64);
        (q, bonus)
    }

    fn memo_value(&mut self, h: usize, feature: usize) -> f64 {
        if self.memo[h].len() <= feature {
            self.memo[h].resize(self.table.len(), f64::NAN);
        }
        let cached = self.memo[h][feature];
        if !cached.is_nan() {
            return cached;
        }
        let q = self.evaluate(h, feature).0;
        self.memo[h][feature] = q;
        q
    }

    /// Backward ridge regressions over the whole buffer.
    pub fn plan(&mut self) -> Result<()> {
        let d = self.features.dim();
        for h in (0..self.horizon).rev() {
            if self.inverses[h].iter().any(|x| !x.is_finite()) {
                return Err(Error::Internal(format!("Gram inverse at step {h} is not finite")));
            }
            let mut rhs = DVector::zeros(d);
            for i in 0..self.buffers[h].len() {
                let next_best = if h + 1 < self.horizon {
                    let next = std::mem::take(&mut self.buffers[h][i].next);
                    let best = next
                        .iter()
                        .map(|&f| self.memo_value(h + 1, f))
                        .fold(f64::NEG_INFINITY, f64::max);
                    self.buffers[h][i].next = next;
                    best
                } else {
                    0.0
                };
                let sample = &self.buffers[h][i];
                let target = sample.reward + next_best;
                let phi = &self.table[sample.feature];
                for (&j, &v) in phi.idx.iter().zip(&phi.val) {
                    rhs[j] += v * target;
                }
            }
            let mut w = &self.inverses[h] * rhs;
            let norm = w.norm();
            if norm > self.weight_bound {
                w *= self.weight_bound / norm;
            }
            self.weights[h] = w;
            self.memo[h].clear();
        }
        Ok(())
    }

    /// Bonus-augmented, capped `Q_h(state, .)`.
    pub fn q_values(&mut self, h: usize, state: usize) -> Vec<f64> {
        (0..self.num_actions)
            .map(|a| {
                let f = self.feature_index(state, a);
                self.memo_value(h, f)
            })
            .collect()
    }

    /// Greedy action (lowest index on ties) and its bonus.
    pub fn act(&mut self, h: usize, state: usize) -> (usize, f64) {
        let q = self.q_values(h, state);
        let a = argmax(&q);
        let f = self.feature_index(state, a);
        (a, self.evaluate(h, f).1)
    }

    pub fn gram(&self, h: usize) -> &DMatrix<f64> {
        &self.grams[h]
    }

    pub fn gram_inverse(&self, h: usize) -> &DMatrix<f64> {
        &self.inverses[h]
    }

    pub fn weights(&self, h: usize) -> &DVector<f64> {
        &self.weights[h]
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn buffer_len(&self, h: usize) -> usize {
        self.buffers[h].len()
    }
}

/// Warm-started LSVI-UCB: the offline transitions seed the regression
/// buffers and Gram matrices, then `n_on` episodes are played.
pub fn lsvi_ucb_hybrid<E, F>(
    features: &F,
    env: &mut E,
    offline: &Dataset,
    n_on: usize,
    config: &LsviConfig,
    rng: &mut SimRng,
) -> Result<RunRecord>
where
    E: Environment + ?Sized,
    F: FeatureMap + ?Sized,
{
    let horizon = env.horizon();
    let mut agent = LsviUcb::new(features, horizon, env.num_actions(), config)?;
    for t in offline.trajectories() {
        if t.horizon() != horizon {
            return Err(Error::LengthMismatch {
                expected: horizon,
                found: t.horizon(),
            });
        }
        agent.observe(t);
    }
    let mut record = RunRecord::new("lsvi_ucb", offline.len(), n_on, env.reward_scale());
    for episode in 0..n_on {
        agent.plan()?;
        let mut bonus_total = 0.0;
        let trajectory = run_episode(env, episode, rng, |h, s, _| {
            let (a, b) = agent.act(h, s);
            bonus_total += b;
            a
        });
        let first = trajectory.steps[0].state;
        let value_estimate = agent.q_values(0, first).into_iter().fold(f64::NEG_INFINITY, f64::max);
        agent.observe(&trajectory);
        record.episodes.push(EpisodeRecord {
            trajectory,
            policy: None,
            value_estimate,
            mean_bonus: bonus_total / horizon as f64,
        });
    }
    Ok(record)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{build_random_tabular, TabularEnv, TabularOneHot};
    use crate::mdp::{DatasetSource, Step};
    use crate::rng::seeded;

    fn one_step(state: usize, action: usize, reward: f64) -> Trajectory {
        Trajectory {
            episode_index: 0,
            steps: vec![Step {
                state,
                action,
                reward,
                next_state: 0,
            }],
        }
    }

    #[test]
    fn empty_buffer_gives_zero_weights_and_tie_break() {
        let f = TabularOneHot {
            num_states: 3,
            num_actions: 2,
        };
        let mut agent = LsviUcb::new(&f, 4, 2, &LsviConfig::default()).unwrap();
        agent.plan().unwrap();
        for h in 0..4 {
            assert_eq!(agent.weights(h).norm(), 0.0);
            for s in 0..3 {
                assert_eq!(agent.act(h, s).0, 0);
            }
        }
    }

    #[test]
    fn repeated_sample_approaches_target() {
        // One-dimensional ridge: w = k r / (lambda + k), so the gap to r is
        // lambda r / (lambda + k).
        let f = TabularOneHot {
            num_states: 1,
            num_actions: 1,
        };
        let config = LsviConfig { lambda: 1.0, beta: 0.0 };
        for k in [1usize, 10, 100, 1000] {
            let mut agent = LsviUcb::new(&f, 1, 1, &config).unwrap();
            for _ in 0..k {
                agent.observe(&one_step(0, 0, 0.8));
            }
            agent.plan().unwrap();
            let q = agent.q_values(0, 0)[0];
            let expected = 0.8 * k as f64 / (1.0 + k as f64);
            assert!((q - expected).abs() < 1e-12);
            assert!((0.8 - q) <= 1.0 / k as f64);
        }
    }

    #[test]
    fn gram_update_is_exact_outer_product() {
        let f = TabularOneHot {
            num_states: 2,
            num_actions: 2,
        };
        let mut agent = LsviUcb::new(&f, 1, 2, &LsviConfig { lambda: 0.5, beta: 1.0 }).unwrap();
        let before = agent.gram(0).clone();
        agent.observe(&one_step(1, 0, 0.3));
        let phi = DVector::from_vec(f.embed(1, 0));
        assert_eq!(agent.gram(0), &(before + &phi * phi.transpose()));
    }

    #[test]
    fn inverse_tracks_gram_and_min_eigenvalue_grows() {
        let mdp = build_random_tabular(6, 3, 2, 3, 0.0).unwrap();
        let f = TabularOneHot {
            num_states: 3,
            num_actions: 2,
        };
        let config = LsviConfig { lambda: 0.7, beta: 0.5 };
        let mut agent = LsviUcb::new(&f, 3, 2, &config).unwrap();
        let mut env = TabularEnv::new(mdp);
        let pi = crate::mdp::UniformPolicy { num_actions: 2 };
        let mut rng = seeded(3);
        let mut previous = vec![0.0; 3];
        for i in 0..30 {
            agent.observe(&crate::env::rollout(&mut env, &pi, i, &mut rng));
            for h in 0..3 {
                let direct = agent.gram(h).clone().cholesky().unwrap().inverse();
                assert!((direct - agent.gram_inverse(h)).amax() < 1e-10);
                let min = agent.gram(h).symmetric_eigenvalues().min();
                assert!(min >= 0.7 - 1e-12 && min >= previous[h] - 1e-12);
                previous[h] = min;
            }
        }
    }

    #[test]
    fn runs_on_random_mdp_with_offline_data() {
        let mdp = build_random_tabular(3, 4, 2, 5, 0.2).unwrap();
        let f = TabularOneHot {
            num_states: 4,
            num_actions: 2,
        };
        let mut env = TabularEnv::new(mdp);
        let behavior = crate::mdp::UniformPolicy { num_actions: 2 };
        let offline = crate::agents::generate_offline_dataset(&mut env, &behavior, 10, &mut seeded(0));
        let run = lsvi_ucb_hybrid(&f, &mut env, &offline, 15, &LsviConfig::default(), &mut seeded(1)).unwrap();
        assert_eq!(run.episodes.len(), 15);
        assert_eq!(run.n_off, 10);
        let empty = Dataset::empty(DatasetSource::Offline);
        let online = lsvi_ucb_hybrid(&f, &mut env, &empty, 15, &LsviConfig::default(), &mut seeded(1)).unwrap();
        assert_eq!(online.n_off, 0);
    }
}
