//! Finite-horizon tabular MDPs and exact dynamic-programming oracles.
//!
//! Steps are zero-based internally: `h` ranges over `0..horizon`, and the
//! value at `h = horizon` is identically zero. The JSON encoding and all
//! user-facing messages use the same zero-based convention.

mod dp;
mod policy;
mod trajectory;

pub use dp::{max_occupancy, max_occupancy_table, optimal_values, policy_occupancy, policy_value, OccupancyTensor, OptimalValues};
pub use policy::{BehaviorPolicy, DeterministicPolicy, StochasticPolicy, UniformPolicy};
pub use trajectory::{sample_episode, Dataset, DatasetSource, Step, Trajectory};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub(crate) const INPUT_TOL: f64 = 1e-12;
pub(crate) const DERIVED_TOL: f64 = 1e-9;

/// A finite episodic MDP with deterministic start state and deterministic
/// rewards in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct TabularMdp {
    num_states: usize,
    num_actions: usize,
    horizon: usize,
    initial_state: usize,
    /// `[h][s][a][s']`, flattened.
    transition: Vec<f64>,
    /// `[h][s][a]`, flattened.
    reward: Vec<f64>,
}

impl TabularMdp {
    /// Builds and validates an MDP from flat row-major arrays.
    pub fn new(
        num_states: usize,
        num_actions: usize,
        horizon: usize,
        initial_state: usize,
        transition: Vec<f64>,
        reward: Vec<f64>,
    ) -> Result<Self> {
        let mdp = Self::new_unchecked(num_states, num_actions, horizon, initial_state, transition, reward)?;
        mdp.validate()?;
        Ok(mdp)
    }

    /// Builds without checking stochasticity or reward range; only the array
    /// shapes are checked. Call [`TabularMdp::validate`] before use.
    pub fn new_unchecked(
        num_states: usize,
        num_actions: usize,
        horizon: usize,
        initial_state: usize,
        transition: Vec<f64>,
        reward: Vec<f64>,
    ) -> Result<Self> {
        if num_states == 0 || num_actions == 0 || horizon == 0 {
            return Err(Error::InvalidMdp(format!(
                "S, A and H must be positive (got S={num_states}, A={num_actions}, H={horizon})"
            )));
        }
        let cells = horizon * num_states * num_actions;
        if transition.len() != cells * num_states {
            return Err(Error::InvalidMdp(format!(
                "transition array has {} entries, expected H*S*A*S = {}",
                transition.len(),
                cells * num_states
            )));
        }
        if reward.len() != cells {
            return Err(Error::InvalidMdp(format!(
                "reward array has {} entries, expected H*S*A = {cells}",
                reward.len()
            )));
        }
        Ok(Self {
            num_states,
            num_actions,
            horizon,
            initial_state,
            transition,
            reward,
        })
    }

    /// Checks every structural invariant and reports the first violation.
    pub fn validate(&self) -> Result<()> {
        if self.initial_state >= self.num_states {
            return Err(Error::InvalidMdp(format!(
                "initial state {} out of range 0..{}",
                self.initial_state, self.num_states
            )));
        }
        for h in 0..self.horizon {
            for s in 0..self.num_states {
                for a in 0..self.num_actions {
                    let row = self.next_state_probs(h, s, a);
                    if let Some((sp, p)) = row.iter().enumerate().find(|(_, p)| !p.is_finite() || **p < 0.0) {
                        return Err(Error::InvalidMdp(format!(
                            "transition (h={h}, s={s}, a={a}) has invalid probability {p} for next state {sp}"
                        )));
                    }
                    let total: f64 = row.iter().sum();
                    if (total - 1.0).abs() > INPUT_TOL {
                        return Err(Error::InvalidMdp(format!(
                            "transition row (h={h}, s={s}, a={a}) sums to {total}, not 1"
                        )));
                    }
                    let r = self.reward(h, s, a);
                    if !(0.0..=1.0).contains(&r) {
                        return Err(Error::InvalidMdp(format!(
                            "reward at (h={h}, s={s}, a={a}) is {r}, outside [0, 1]"
                        )));
                    }
                }
            }
        }
        Ok(())
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

    pub fn initial_state(&self) -> usize {
        self.initial_state
    }

    #[inline]
    pub(crate) fn cell(&self, h: usize, s: usize, a: usize) -> usize {
        (h * self.num_states + s) * self.num_actions + a
    }

    #[inline]
    pub fn reward(&self, h: usize, s: usize, a: usize) -> f64 {
        self.reward[self.cell(h, s, a)]
    }

    #[inline]
    pub fn next_state_probs(&self, h: usize, s: usize, a: usize) -> &[f64] {
        let start = self.cell(h, s, a) * self.num_states;
        &self.transition[start..start + self.num_states]
    }

    pub fn rewards(&self) -> &[f64] {
        &self.reward
    }

    pub fn transitions(&self) -> &[f64] {
        &self.transition
    }

    /// Same dynamics, with the reward replaced by `reward` (`[h][s][a]`).
    pub fn with_rewards(&self, reward: Vec<f64>) -> Result<Self> {
        Self::new(
            self.num_states,
            self.num_actions,
            self.horizon,
            self.initial_state,
            self.transition.clone(),
            reward,
        )
    }

    /// Expected next-step value `sum_{s'} P_h(s'|s,a) v(s')`.
    #[inline]
    pub fn expected_next(&self, h: usize, s: usize, a: usize, next_values: &[f64]) -> f64 {
        self.next_state_probs(h, s, a)
            .iter()
            .zip(next_values)
            .map(|(p, v)| p * v)
            .sum()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(&MdpDocument::from(self))?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: MdpDocument = serde_json::from_str(text)?;
        doc.try_into()
    }
}

/// Nested JSON encoding: `P[h][s][a]` is a next-state row, `R[h][s][a]` a
/// scalar.
#[derive(Debug, Serialize, Deserialize)]
struct MdpDocument {
    #[serde(rename = "S")]
    num_states: usize,
    #[serde(rename = "A")]
    num_actions: usize,
    #[serde(rename = "H")]
    horizon: usize,
    s0: usize,
    #[serde(rename = "P")]
    transition: Vec<Vec<Vec<Vec<f64>>>>,
    #[serde(rename = "R")]
    reward: Vec<Vec<Vec<f64>>>,
}

impl From<&TabularMdp> for MdpDocument {
    fn from(mdp: &TabularMdp) -> Self {
        let (hs, ss, aa) = (mdp.horizon, mdp.num_states, mdp.num_actions);
        let transition = (0..hs)
            .map(|h| {
                (0..ss)
                    .map(|s| (0..aa).map(|a| mdp.next_state_probs(h, s, a).to_vec()).collect())
                    .collect()
            })
            .collect();
        let reward = (0..hs)
            .map(|h| (0..ss).map(|s| (0..aa).map(|a| mdp.reward(h, s, a)).collect()).collect())
            .collect();
        MdpDocument {
            num_states: ss,
            num_actions: aa,
            horizon: hs,
            s0: mdp.initial_state,
            transition,
            reward,
        }
    }
}

impl TryFrom<MdpDocument> for TabularMdp {
    type Error = Error;

    fn try_from(doc: MdpDocument) -> Result<Self> {
        let shape_err = |what: &str| Error::InvalidMdp(format!("{what} does not match the declared (H, S, A) shape"));
        if doc.transition.len() != doc.horizon || doc.reward.len() != doc.horizon {
            return Err(shape_err("outer dimension"));
        }
        let mut transition = Vec::with_capacity(doc.horizon * doc.num_states * doc.num_actions * doc.num_states);
        let mut reward = Vec::with_capacity(doc.horizon * doc.num_states * doc.num_actions);
        for (ph, rh) in doc.transition.iter().zip(&doc.reward) {
            if ph.len() != doc.num_states || rh.len() != doc.num_states {
                return Err(shape_err("state dimension"));
            }
            for (ps, rs) in ph.iter().zip(rh) {
                if ps.len() != doc.num_actions || rs.len() != doc.num_actions {
                    return Err(shape_err("action dimension"));
                }
                for row in ps {
                    if row.len() != doc.num_states {
                        return Err(shape_err("next-state row"));
                    }
                    transition.extend_from_slice(row);
                }
                reward.extend_from_slice(rs);
            }
        }
        TabularMdp::new(doc.num_states, doc.num_actions, doc.horizon, doc.s0, transition, reward)
    }
}

/// Index of the largest value, lowest index on ties.
#[inline]
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;

    pub(crate) fn two_state_chain() -> TabularMdp {
        // s0 -a0-> s1 -a0-> s1; action 1 stays put. Reward 1 only at (h=1, s=1, a=0).
        let mut p = vec![0.0; 2 * 2 * 2 * 2];
        let mut r = vec![0.0; 2 * 2 * 2];
        for h in 0..2 {
            for s in 0..2 {
                p[((h * 2 + s) * 2) * 2 + 1] = 1.0;
                p[((h * 2 + s) * 2 + 1) * 2 + s] = 1.0;
            }
        }
        r[(2 + 1) * 2] = 1.0;
        TabularMdp::new(2, 2, 2, 0, p, r).unwrap()
    }

    #[test]
    fn accepts_well_formed() {
        assert!(two_state_chain().validate().is_ok());
    }

    #[test]
    fn rejects_short_row_naming_cell() {
        let mdp = two_state_chain();
        let mut p = mdp.transitions().to_vec();
        let start = mdp.cell(1, 0, 1) * 2;
        p[start] = 0.9;
        p[start + 1] = 0.0;
        let err = TabularMdp::new(2, 2, 2, 0, p, mdp.rewards().to_vec()).unwrap_err().to_string();
        assert!(err.contains("h=1, s=0, a=1"), "{err}");
        assert!(err.contains("0.9"), "{err}");
    }

    #[test]
    fn rejects_reward_out_of_range() {
        let mdp = two_state_chain();
        let mut r = mdp.rewards().to_vec();
        r[mdp.cell(0, 1, 0)] = 1.5;
        let err = mdp.with_rewards(r).unwrap_err().to_string();
        assert!(err.contains("h=0, s=1, a=0") && err.contains("1.5"), "{err}");
    }

    #[test]
    fn rejects_bad_initial_state_and_shape() {
        let mdp = two_state_chain();
        assert!(TabularMdp::new(2, 2, 2, 2, mdp.transitions().to_vec(), mdp.rewards().to_vec()).is_err());
        assert!(TabularMdp::new(2, 2, 2, 0, vec![0.5; 3], mdp.rewards().to_vec()).is_err());
    }

    #[test]
    fn json_round_trip_and_layout() {
        let mdp = two_state_chain();
        let text = mdp.to_json().unwrap();
        let value: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(value["S"], 2);
        assert_eq!(value["s0"], 0);
        // P[h=0][s=0][a=0] moves to state 1.
        assert_eq!(value["P"][0][0][0], serde_json::json!([0.0, 1.0]));
        assert_eq!(value["R"][1][1][0], 1.0);
        assert_eq!(TabularMdp::from_json(&text).unwrap(), mdp);
    }

    #[test]
    fn argmax_prefers_lowest_index() {
        assert_eq!(argmax(&[1.0, 3.0, 3.0]), 1);
        assert_eq!(argmax(&[2.0, 2.0]), 0);
    }
}
