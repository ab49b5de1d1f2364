use serde::{Deserialize, Serialize};

use super::{argmax, DeterministicPolicy, StochasticPolicy, TabularMdp, DERIVED_TOL};
use crate::error::{Error, Result};

/// `Q*` over `(h, s, a)` and `V*` over `(h, s)` with the terminal row
/// `V*_H = 0` included.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimalValues {
    num_states: usize,
    num_actions: usize,
    q: Vec<f64>,
    v: Vec<f64>,
}

impl OptimalValues {
    #[inline]
    pub fn q(&self, h: usize, s: usize, a: usize) -> f64 {
        self.q[(h * self.num_states + s) * self.num_actions + a]
    }

    pub fn q_row(&self, h: usize, s: usize) -> &[f64] {
        let start = (h * self.num_states + s) * self.num_actions;
        &self.q[start..start + self.num_actions]
    }

    #[inline]
    pub fn v(&self, h: usize, s: usize) -> f64 {
        self.v[h * self.num_states + s]
    }

    /// `Q*` flattened as `[h][s][a]`.
    pub fn q_table(&self) -> &[f64] {
        &self.q
    }

    pub fn horizon(&self) -> usize {
        self.q.len() / (self.num_states * self.num_actions)
    }

    pub fn greedy_policy(&self) -> DeterministicPolicy {
        let horizon = self.horizon();
        let actions = (0..horizon)
            .flat_map(|h| (0..self.num_states).map(move |s| (h, s)))
            .map(|(h, s)| argmax(self.q_row(h, s)))
            .collect();
        DeterministicPolicy::new(self.num_states, self.num_actions, actions).expect("argmax is in range")
    }
}

/// Backward induction for `Q*` and `V*`.
pub fn optimal_values(mdp: &TabularMdp) -> OptimalValues {
    let (ns, na, nh) = (mdp.num_states(), mdp.num_actions(), mdp.horizon());
    let mut q = vec![0.0; nh * ns * na];
    let mut v = vec![0.0; (nh + 1) * ns];
    for h in (0..nh).rev() {
        let (head, next) = v.split_at_mut((h + 1) * ns);
        let next = &next[..ns];
        for s in 0..ns {
            let mut best = f64::NEG_INFINITY;
            for a in 0..na {
                let value = mdp.reward(h, s, a) + mdp.expected_next(h, s, a, next);
                q[(h * ns + s) * na + a] = value;
                best = best.max(value);
            }
            head[h * ns + s] = best;
        }
    }
    OptimalValues {
        num_states: ns,
        num_actions: na,
        q,
        v,
    }
}

/// `V^pi_h(s)` for all `(h, s)` including the zero terminal row.
pub(crate) fn policy_values(mdp: &TabularMdp, policy: &StochasticPolicy) -> Vec<f64> {
    let (ns, na, nh) = (mdp.num_states(), mdp.num_actions(), mdp.horizon());
    let mut v = vec![0.0; (nh + 1) * ns];
    for h in (0..nh).rev() {
        let (head, next) = v.split_at_mut((h + 1) * ns);
        let next = &next[..ns];
        for s in 0..ns {
            let probs = policy.probs(h, s);
            head[h * ns + s] = (0..na)
                .filter(|&a| probs[a] > 0.0)
                .map(|a| probs[a] * (mdp.reward(h, s, a) + mdp.expected_next(h, s, a, next)))
                .sum();
        }
    }
    v
}

/// `V^pi_1(s_init)` by backward policy evaluation.
pub fn policy_value(mdp: &TabularMdp, policy: &StochasticPolicy) -> f64 {
    policy_values(mdp, policy)[mdp.initial_state()]
}

/// State-action occupancy `d_h(s, a)` of a policy or behavior distribution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OccupancyTensor {
    num_states: usize,
    num_actions: usize,
    horizon: usize,
    density: Vec<f64>,
}

impl OccupancyTensor {
    /// Wraps a density and checks that every step slice sums to one.
    pub fn new(num_states: usize, num_actions: usize, horizon: usize, density: Vec<f64>) -> Result<Self> {
        let t = Self::new_unnormalized(num_states, num_actions, horizon, density)?;
        for h in 0..horizon {
            let total: f64 = t.step(h).iter().sum();
            if (total - 1.0).abs() > DERIVED_TOL {
                return Err(Error::InvalidParams(format!("occupancy slice h={h} sums to {total}")));
            }
        }
        Ok(t)
    }

    pub(crate) fn new_unnormalized(
        num_states: usize,
        num_actions: usize,
        horizon: usize,
        density: Vec<f64>,
    ) -> Result<Self> {
        let expected = num_states * num_actions * horizon;
        if density.len() != expected {
            return Err(Error::LengthMismatch {
                expected,
                found: density.len(),
            });
        }
        Ok(Self {
            num_states,
            num_actions,
            horizon,
            density,
        })
    }

    #[inline]
    pub fn get(&self, h: usize, s: usize, a: usize) -> f64 {
        self.density[(h * self.num_states + s) * self.num_actions + a]
    }

    /// The `(s, a)` slice at step `h`.
    pub fn step(&self, h: usize) -> &[f64] {
        let len = self.num_states * self.num_actions;
        &self.density[h * len..(h + 1) * len]
    }

    pub fn density(&self) -> &[f64] {
        &self.density
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

    /// Pointwise average of tensors with the same shape.
    pub fn average(items: &[OccupancyTensor]) -> Result<Self> {
        let first = items
            .first()
            .ok_or_else(|| Error::InvalidParams("cannot average zero occupancy tensors".into()))?;
        let mut density = vec![0.0; first.density.len()];
        for t in items {
            if t.density.len() != density.len() {
                return Err(Error::LengthMismatch {
                    expected: density.len(),
                    found: t.density.len(),
                });
            }
            for (acc, x) in density.iter_mut().zip(&t.density) {
                *acc += x;
            }
        }
        let n = items.len() as f64;
        density.iter_mut().for_each(|x| *x /= n);
        Ok(Self { density, ..first.clone() })
    }
}

/// Forward recursion for the occupancy measure of `policy`.
pub fn policy_occupancy(mdp: &TabularMdp, policy: &StochasticPolicy) -> OccupancyTensor {
    let (ns, na, nh) = (mdp.num_states(), mdp.num_actions(), mdp.horizon());
    let mut density = vec![0.0; nh * ns * na];
    let mut state_dist = vec![0.0; ns];
    state_dist[mdp.initial_state()] = 1.0;
    for h in 0..nh {
        let mut next = vec![0.0; ns];
        for s in 0..ns {
            if state_dist[s] == 0.0 {
                continue;
            }
            let probs = policy.probs(h, s);
            for a in 0..na {
                let mass = state_dist[s] * probs[a];
                density[(h * ns + s) * na + a] = mass;
                if mass > 0.0 {
                    for (acc, p) in next.iter_mut().zip(mdp.next_state_probs(h, s, a)) {
                        *acc += mass * p;
                    }
                }
            }
        }
        state_dist = next;
    }
    OccupancyTensor {
        num_states: ns,
        num_actions: na,
        horizon: nh,
        density,
    }
}

/// `sup_pi d^pi_h(s, a)`.
///
/// Solved as the optimal value of the auxiliary MDP whose only reward is 1 at
/// `(h, s, a)`. Since the action at step `h` is free, the answer is the
/// maximal probability of reaching `s` at step `h`.
pub fn max_occupancy(mdp: &TabularMdp, h: usize, s: usize, a: usize) -> f64 {
    assert!(h < mdp.horizon() && s < mdp.num_states() && a < mdp.num_actions());
    let ns = mdp.num_states();
    let mut v: Vec<f64> = (0..ns).map(|x| if x == s { 1.0 } else { 0.0 }).collect();
    for g in (0..h).rev() {
        v = (0..ns)
            .map(|x| {
                (0..mdp.num_actions())
                    .map(|b| mdp.expected_next(g, x, b, &v))
                    .fold(f64::NEG_INFINITY, f64::max)
            })
            .collect();
    }
    v[mdp.initial_state()]
}

/// [`max_occupancy`] for every `(h, s, a)`, as an unnormalized tensor.
pub fn max_occupancy_table(mdp: &TabularMdp) -> Vec<f64> {
    let (ns, na, nh) = (mdp.num_states(), mdp.num_actions(), mdp.horizon());
    let mut out = vec![0.0; nh * ns * na];
    for h in 0..nh {
        for s in 0..ns {
            let m = max_occupancy(mdp, h, s, 0);
            out[(h * ns + s) * na..(h * ns + s + 1) * na].fill(m);
        }
    }
    out
}
