use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{EpisodeRecord, RunRecord};
use crate::env::{run_episode, Environment};
use crate::error::{Error, Result};
use crate::mdp::{argmax, optimal_values, Dataset, DeterministicPolicy, TabularMdp, Trajectory, DERIVED_TOL};
use crate::rng::SimRng;

/// Confidence width `c1 * ln(n_total * horizon * class_size / delta)`.
pub fn beta_schedule(n_total: usize, horizon: usize, class_size: usize, delta: f64, c1: f64) -> f64 {
    c1 * ((n_total * horizon * class_size) as f64 / delta).ln()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GolfConfig {
    /// Fixed confidence width; when absent the schedule below is used.
    pub beta: Option<f64>,
    pub c1: f64,
    pub delta: f64,
    /// How the harness closes the class under the Bellman operator.
    pub construction: ClassConstruction,
    /// Extra random last-step tables added to the reward when the harness
    /// builds a backup-closed class.
    pub extra_candidates: usize,
    pub class_seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClassConstruction {
    /// One member per last-step table: the table and its repeated backups.
    Chains,
    /// All combinations of per-step backups; size grows as `k^H`.
    Product,
}

impl Default for GolfConfig {
    fn default() -> Self {
        Self {
            beta: None,
            c1: 1.0,
            delta: 0.1,
            construction: ClassConstruction::Chains,
            extra_candidates: 3,
            class_seed: 0,
        }
    }
}

impl GolfConfig {
    pub fn resolve_beta(&self, n_total: usize, horizon: usize, class_size: usize) -> Result<f64> {
        if !(self.delta > 0.0 && self.delta < 1.0) || self.c1 < 0.0 {
            return Err(Error::InvalidParams(format!(
                "DISC-GOLF needs delta in (0, 1) and c1 >= 0 (got {self:?})"
            )));
        }
        match self.beta {
            Some(b) if b < 0.0 => Err(Error::InvalidParams(format!("beta must be nonnegative, got {b}"))),
            Some(b) => Ok(b),
            None => Ok(beta_schedule(n_total.max(1), horizon, class_size, self.delta, self.c1)),
        }
    }
}

/// An enumerable class of Q-function tuples `f = (f_0, .., f_{H-1})`.
///
/// Per-step tables are stored once and members refer to them by index, so
/// losses are computed per distinct component rather than per member.
#[derive(Debug, Clone)]
pub struct FiniteFunctionClass {
    num_states: usize,
    num_actions: usize,
    horizon: usize,
    /// `components[h][j]` is a table over `(s, a)`.
    components: Vec<Vec<Vec<f64>>>,
    /// `next_max[h][j][s] = max_a components[h][j](s, a)`.
    next_max: Vec<Vec<Vec<f64>>>,
    members: Vec<Vec<usize>>,
    reference: Option<Reference>,
}

#[derive(Debug, Clone)]
struct Reference {
    mdp: TabularMdp,
    complete: bool,
    q_star: Option<usize>,
}

fn sup_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn intern(tables: &mut Vec<Vec<f64>>, table: Vec<f64>) -> usize {
    if let Some(j) = tables.iter().position(|t| t == &table) {
        return j;
    }
    tables.push(table);
    tables.len() - 1
}

impl FiniteFunctionClass {
    /// `members[i][h]` is the table `f_h` of member `i`, flattened `[s][a]`.
    pub fn new(num_states: usize, num_actions: usize, horizon: usize, members: Vec<Vec<Vec<f64>>>) -> Result<Self> {
        if members.is_empty() {
            return Err(Error::InvalidParams("function class is empty".into()));
        }
        let cap = horizon as f64;
        let mut components = vec![Vec::new(); horizon];
        let mut indexed = Vec::with_capacity(members.len());
        for (i, member) in members.into_iter().enumerate() {
            if member.len() != horizon {
                return Err(Error::LengthMismatch {
                    expected: horizon,
                    found: member.len(),
                });
            }
            let mut idx = Vec::with_capacity(horizon);
            for (h, table) in member.into_iter().enumerate() {
                if table.len() != num_states * num_actions {
                    return Err(Error::LengthMismatch {
                        expected: num_states * num_actions,
                        found: table.len(),
                    });
                }
                if table.iter().any(|v| !(0.0..=cap).contains(v)) {
                    return Err(Error::InvalidParams(format!("member {i} has values outside [0, {cap}] at h={h}")));
                }
                idx.push(intern(&mut components[h], table));
            }
            indexed.push(idx);
        }
        Ok(Self::from_parts(num_states, num_actions, horizon, components, indexed))
    }

    fn from_parts(
        num_states: usize,
        num_actions: usize,
        horizon: usize,
        components: Vec<Vec<Vec<f64>>>,
        members: Vec<Vec<usize>>,
    ) -> Self {
        let next_max = components
            .iter()
            .map(|tables| {
                tables
                    .iter()
                    .map(|t| {
                        t.chunks(num_actions)
                            .map(|row| row.iter().copied().fold(f64::NEG_INFINITY, f64::max))
                            .collect()
                    })
                    .collect()
            })
            .collect();
        Self {
            num_states,
            num_actions,
            horizon,
            components,
            next_max,
            members,
            reference: None,
        }
    }

    /// Product class closed under the Bellman operator of `mdp`.
    ///
    /// The last step holds the reward table plus `candidates`; every earlier
    /// step holds the backups of the step after it. Every member is the
    /// product of per-step choices.
    pub fn backup_product(mdp: &TabularMdp, candidates: Vec<Vec<f64>>) -> Result<Self> {
        let (ns, na, nh) = (mdp.num_states(), mdp.num_actions(), mdp.horizon());
        if nh == 0 {
            return Err(Error::InvalidParams("horizon must be positive".into()));
        }
        let mut components: Vec<Vec<Vec<f64>>> = vec![Vec::new(); nh];
        let last = nh - 1;
        intern(&mut components[last], bellman_backup(mdp, last, None));
        for c in candidates {
            if c.len() != ns * na {
                return Err(Error::LengthMismatch {
                    expected: ns * na,
                    found: c.len(),
                });
            }
            intern(&mut components[last], c);
        }
        for h in (0..last).rev() {
            let next: Vec<Vec<f64>> = components[h + 1].clone();
            for g in &next {
                intern(&mut components[h], bellman_backup(mdp, h, Some(g)));
            }
        }
        let cap = nh as f64;
        for (h, tables) in components.iter().enumerate() {
            if tables.iter().flatten().any(|v| !(0.0..=cap).contains(v)) {
                return Err(Error::InvalidParams(format!(
                    "backed-up tables at h={h} leave [0, {cap}]; use smaller candidates"
                )));
            }
        }
        let size: usize = components.iter().map(Vec::len).product();
        let mut members = Vec::with_capacity(size);
        for mut i in 0..size {
            let mut idx = vec![0; nh];
            for h in (0..nh).rev() {
                idx[h] = i % components[h].len();
                i /= components[h].len();
            }
            members.push(idx);
        }
        Self::from_parts(ns, na, nh, components, members).with_reference(mdp)
    }

    /// One member per last-step table `g` (the reward and each candidate):
    /// `(T_0 .. T_{H-2} g, .., T_{H-2} g, g)`. Each member's backups are its
    /// own components, so the class is closed under the Bellman operator and
    /// the reward chain is `Q*`.
    pub fn backup_chains(mdp: &TabularMdp, candidates: Vec<Vec<f64>>) -> Result<Self> {
        let (ns, na, nh) = (mdp.num_states(), mdp.num_actions(), mdp.horizon());
        if nh == 0 {
            return Err(Error::InvalidParams("horizon must be positive".into()));
        }
        let last = nh - 1;
        let mut tails = vec![bellman_backup(mdp, last, None)];
        for c in candidates {
            if c.len() != ns * na {
                return Err(Error::LengthMismatch {
                    expected: ns * na,
                    found: c.len(),
                });
            }
            tails.push(c);
        }
        let members = tails
            .into_iter()
            .map(|g| {
                let mut chain = vec![g];
                for h in (0..last).rev() {
                    let next = bellman_backup(mdp, h, Some(&chain[chain.len() - 1]));
                    chain.push(next);
                }
                chain.reverse();
                chain
            })
            .collect();
        Self::new(ns, na, nh, members)?.with_reference(mdp)
    }

    /// Attaches the true MDP: checks Bellman completeness and locates `Q*`.
    pub fn with_reference(mut self, mdp: &TabularMdp) -> Result<Self> {
        if (mdp.num_states(), mdp.num_actions(), mdp.horizon()) != (self.num_states, self.num_actions, self.horizon) {
            return Err(Error::InvalidParams("function class and MDP have different shapes".into()));
        }
        let complete = self.members.iter().all(|m| {
            (0..self.horizon).all(|h| {
                let next = (h + 1 < self.horizon).then(|| self.components[h + 1][m[h + 1]].as_slice());
                let backup = bellman_backup(mdp, h, next);
                self.components[h].iter().any(|t| sup_distance(t, &backup) <= DERIVED_TOL)
            })
        });
        let opt = optimal_values(mdp);
        let block = self.num_states * self.num_actions;
        let q_star = (0..self.members.len()).find(|&i| {
            (0..self.horizon).all(|h| {
                let table = &self.components[h][self.members[i][h]];
                sup_distance(table, &opt.q_table()[h * block..(h + 1) * block]) <= DERIVED_TOL
            })
        });
        self.reference = Some(Reference {
            mdp: mdp.clone(),
            complete,
            q_star,
        });
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    /// `f_h(s, a)` for member `i`.
    pub fn value(&self, i: usize, h: usize, s: usize, a: usize) -> f64 {
        self.components[h][self.members[i][h]][s * self.num_actions + a]
    }

    pub fn member_table(&self, i: usize, h: usize) -> &[f64] {
        &self.components[h][self.members[i][h]]
    }

    /// Whether the class is closed under the reference MDP's Bellman operator;
    /// `None` without a reference.
    pub fn is_complete(&self) -> Option<bool> {
        self.reference.as_ref().map(|r| r.complete)
    }

    /// Index of the member equal to `Q*`, when a reference MDP is attached.
    pub fn q_star_index(&self) -> Option<usize> {
        self.reference.as_ref().and_then(|r| r.q_star)
    }

    pub fn greedy_policy(&self, i: usize) -> DeterministicPolicy {
        let actions = (0..self.horizon)
            .flat_map(|h| (0..self.num_states).map(move |s| (h, s)))
            .map(|(h, s)| {
                let t = self.member_table(i, h);
                argmax(&t[s * self.num_actions..(s + 1) * self.num_actions])
            })
            .collect();
        DeterministicPolicy::new(self.num_states, self.num_actions, actions).expect("argmax is in range")
    }

    /// `max_a f_0(s, a)` for member `i`.
    pub fn initial_value(&self, i: usize, s: usize) -> f64 {
        self.next_max[0][self.members[i][0]][s]
    }
}

/// `(T_h g)(s, a) = R_h(s, a) + E[max_a' g(s', a')]`, with `g = 0` past the
/// last step.
fn bellman_backup(mdp: &TabularMdp, h: usize, next: Option<&[f64]>) -> Vec<f64> {
    let (ns, na) = (mdp.num_states(), mdp.num_actions());
    let v: Vec<f64> = match next {
        Some(g) => g
            .chunks(na)
            .map(|row| row.iter().copied().fold(f64::NEG_INFINITY, f64::max))
            .collect(),
        None => vec![0.0; ns],
    };
    (0..ns)
        .flat_map(|s| (0..na).map(move |a| (s, a)))
        .map(|(s, a)| mdp.reward(h, s, a) + mdp.expected_next(h, s, a, &v))
        .collect()
}

/// Sufficient statistics of the squared loss for one `(s, a, s')` triple.
#[derive(Debug, Clone, Copy, Default)]
struct Group {
    n: f64,
    sum_r: f64,
    sum_r2: f64,
}

/// One episode of the confidence-set trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GolfEpisode {
    /// Member indices in the confidence set used to act.
    pub survivors: Vec<usize>,
    pub selected: usize,
    /// Whether `Q*` was in the set; `None` without a reference MDP.
    pub q_star_survived: Option<bool>,
    /// Mean over the buffer (before this episode's data) of
    /// `sum_h (f_h - T_h f_{h+1})^2` for the selected member.
    pub bellman_error: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfidenceSetTrace {
    pub beta: f64,
    pub episodes: Vec<GolfEpisode>,
}

impl ConfidenceSetTrace {
    /// Fraction of episodes whose confidence set contained `Q*`.
    pub fn q_star_survival_rate(&self) -> Option<f64> {
        let flags: Option<Vec<bool>> = self.episodes.iter().map(|e| e.q_star_survived).collect();
        let flags = flags?;
        Some(flags.iter().filter(|f| **f).count() as f64 / flags.len().max(1) as f64)
    }
}

/// Finite-class GOLF whose loss buffers start with the offline data.
#[derive(Debug, Clone)]
pub struct DiscGolf<'c> {
    class: &'c FiniteFunctionClass,
    beta: f64,
    groups: Vec<BTreeMap<(usize, usize, usize), Group>>,
    counts: Vec<usize>,
}

impl<'c> DiscGolf<'c> {
    pub fn new(class: &'c FiniteFunctionClass, beta: f64) -> Result<Self> {
        if !(beta >= 0.0) {
            return Err(Error::InvalidParams(format!("beta must be nonnegative, got {beta}")));
        }
        Ok(Self {
            class,
            beta,
            groups: vec![BTreeMap::new(); class.horizon],
            counts: vec![0; class.horizon],
        })
    }

    pub fn observe(&mut self, trajectory: &Trajectory) {
        for (h, st) in trajectory.steps.iter().enumerate() {
            let g = self.groups[h].entry((st.state, st.action, st.next_state)).or_default();
            g.n += 1.0;
            g.sum_r += st.reward;
            g.sum_r2 += st.reward * st.reward;
            self.counts[h] += 1;
        }
    }

    /// `L_h(f_h = component j, f_{h+1} = component k)` for every pair;
    /// indexed `[j][k]` (one column when `h` is the last step).
    pub fn losses(&self, h: usize) -> Vec<Vec<f64>> {
        let c = self.class;
        let na = c.num_actions;
        let zero = vec![0.0; c.num_states];
        let nexts: Vec<&[f64]> = if h + 1 < c.horizon {
            c.next_max[h + 1].iter().map(Vec::as_slice).collect()
        } else {
            vec![zero.as_slice()]
        };
        c.components[h]
            .iter()
            .map(|table| {
                nexts
                    .iter()
                    .map(|m| {
                        self.groups[h]
                            .iter()
                            .map(|(&(s, a, s2), g)| {
                                let d = table[s * na + a] - m[s2];
                                g.n * d * d - 2.0 * d * g.sum_r + g.sum_r2
                            })
                            .sum()
                    })
                    .collect()
            })
            .collect()
    }

    /// Members whose excess loss is at most `beta` at every step.
    pub fn confidence_set(&self) -> Vec<usize> {
        let c = self.class;
        let mut excess: Vec<Vec<Vec<f64>>> = Vec::with_capacity(c.horizon);
        for h in 0..c.horizon {
            let l = self.losses(h);
            let cols = l[0].len();
            let mins: Vec<f64> = (0..cols)
                .map(|k| l.iter().map(|row| row[k]).fold(f64::INFINITY, f64::min))
                .collect();
            excess.push(l.into_iter().map(|row| row.iter().zip(&mins).map(|(x, m)| x - m).collect()).collect());
        }
        (0..c.members.len())
            .filter(|&i| {
                let m = &c.members[i];
                (0..c.horizon).all(|h| {
                    let k = if h + 1 < c.horizon { m[h + 1] } else { 0 };
                    excess[h][m[h]][k] <= self.beta
                })
            })
            .collect()
    }

    /// The most optimistic survivor at `s1`, lowest index on ties.
    pub fn select(&self, survivors: &[usize], s1: usize) -> Option<usize> {
        let mut best: Option<usize> = None;
        for &i in survivors {
            let v = self.class.initial_value(i, s1);
            if best.is_none_or(|b| v > self.class.initial_value(b, s1)) {
                best = Some(i);
            }
        }
        best
    }

    /// In-sample mean of the squared true Bellman error of member `i`,
    /// summed over steps.
    pub fn in_sample_bellman_error(&self, i: usize, mdp: &TabularMdp) -> f64 {
        let c = self.class;
        let na = c.num_actions;
        (0..c.horizon)
            .map(|h| {
                if self.counts[h] == 0 {
                    return 0.0;
                }
                let next = (h + 1 < c.horizon).then(|| c.member_table(i, h + 1));
                let backup = bellman_backup(mdp, h, next);
                let table = c.member_table(i, h);
                let total: f64 = self.groups[h]
                    .iter()
                    .map(|(&(s, a, _), g)| {
                        let e = table[s * na + a] - backup[s * na + a];
                        g.n * e * e
                    })
                    .sum();
                total / self.counts[h] as f64
            })
            .sum()
    }
}

/// Runs finite-class DISC-GOLF for `n_on` episodes.
pub fn disc_golf_finite<E: Environment + ?Sized>(
    env: &mut E,
    class: &FiniteFunctionClass,
    offline: &Dataset,
    n_on: usize,
    beta: f64,
    rng: &mut SimRng,
) -> Result<(RunRecord, ConfidenceSetTrace)> {
    let horizon = env.horizon();
    if class.horizon != horizon || env.num_actions() != class.num_actions || env.num_states() != Some(class.num_states) {
        return Err(Error::InvalidParams("function class shape does not match the environment".into()));
    }
    let mut agent = DiscGolf::new(class, beta)?;
    for t in offline.trajectories() {
        if t.horizon() != horizon {
            return Err(Error::LengthMismatch {
                expected: horizon,
                found: t.horizon(),
            });
        }
        agent.observe(t);
    }
    let reference = class.reference.as_ref();
    let mut record = RunRecord::new("disc_golf", offline.len(), n_on, env.reward_scale());
    let mut trace = ConfidenceSetTrace {
        beta,
        episodes: Vec::with_capacity(n_on),
    };
    for episode in 0..n_on {
        let survivors = agent.confidence_set();
        if survivors.is_empty() {
            return Err(Error::EmptyConfidenceSet { episode, beta });
        }
        let mut selected = None;
        let trajectory = run_episode(env, episode, rng, |h, s, _| {
            let i = *selected.get_or_insert_with(|| agent.select(&survivors, s).expect("nonempty"));
            let row = &class.member_table(i, h)[s * class.num_actions..(s + 1) * class.num_actions];
            argmax(row)
        });
        let selected = selected.expect("horizon is positive");
        let q_star_survived = reference.map(|r| r.q_star.is_some_and(|q| survivors.binary_search(&q).is_ok()));
        let bellman_error = reference.map(|r| agent.in_sample_bellman_error(selected, &r.mdp));
        let value_estimate = class.initial_value(selected, trajectory.steps[0].state);
        agent.observe(&trajectory);
        record.episodes.push(EpisodeRecord {
            trajectory,
            policy: Some(class.greedy_policy(selected)),
            value_estimate,
            mean_bonus: 0.0,
        });
        trace.episodes.push(GolfEpisode {
            survivors,
            selected,
            q_star_survived,
            bellman_error,
        });
    }
    Ok((record, trace))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{build_random_tabular, TabularEnv};
    use crate::mdp::{DatasetSource, StochasticPolicy};
    use crate::rng::seeded;

    fn desk() -> TabularMdp {
        build_random_tabular(11, 2, 2, 2, 0.0).unwrap()
    }

    fn desk_class(mdp: &TabularMdp) -> FiniteFunctionClass {
        let candidates = vec![vec![0.0; 4], vec![1.0; 4], vec![0.25, 0.75, 0.5, 0.1]];
        FiniteFunctionClass::backup_product(mdp, candidates).unwrap()
    }

    /// Loss written straight from its definition, one transition at a time.
    fn brute_force_survivors(class: &FiniteFunctionClass, data: &[Trajectory], beta: f64) -> Vec<usize> {
        let nh = class.horizon();
        let na = class.num_actions();
        let loss = |f: &[f64], g: Option<&[f64]>, h: usize| -> f64 {
            data.iter()
                .map(|t| {
                    let st = t.steps[h];
                    let next = g.map_or(0.0, |g| {
                        g[st.next_state * na..(st.next_state + 1) * na].iter().copied().fold(f64::MIN, f64::max)
                    });
                    (f[st.state * na + st.action] - st.reward - next).powi(2)
                })
                .sum()
        };
        (0..class.len())
            .filter(|&i| {
                (0..nh).all(|h| {
                    let g = (h + 1 < nh).then(|| class.member_table(i, h + 1));
                    let own = loss(class.member_table(i, h), g, h);
                    let best = (0..class.len())
                        .map(|j| loss(class.member_table(j, h), g, h))
                        .fold(f64::INFINITY, f64::min);
                    own - best <= beta
                })
            })
            .collect()
    }

    #[test]
    fn beta_schedule_properties() {
        let b = beta_schedule(50, 2, 16, 0.1, 1.0);
        assert!((b - 16_000f64.ln()).abs() < 1e-12);
        assert!((beta_schedule(50, 2, 32, 0.1, 1.0) - b - 2f64.ln()).abs() < 1e-12);
        assert!(beta_schedule(1, 2, 1, 0.2, 1.0) < beta_schedule(1, 2, 1, 0.1, 1.0));
        assert!((beta_schedule(50, 2, 16, 0.1, 2.5) - 2.5 * b).abs() < 1e-12);
    }

    #[test]
    fn desk_class_is_complete_and_realizable() {
        let mdp = desk();
        let class = desk_class(&mdp);
        assert_eq!(class.len(), 16);
        assert_eq!(class.is_complete(), Some(true));
        assert!(class.q_star_index().is_some());
    }

    #[test]
    fn chain_class_is_complete_and_small() {
        let mdp = build_random_tabular(12, 3, 2, 6, 0.3).unwrap();
        let candidates = vec![vec![0.5; 6], vec![0.0; 6], vec![1.0, 0.0, 1.0, 0.0, 1.0, 0.0]];
        let class = FiniteFunctionClass::backup_chains(&mdp, candidates).unwrap();
        assert_eq!(class.len(), 4);
        assert_eq!(class.is_complete(), Some(true));
        assert_eq!(class.q_star_index(), Some(0));
    }

    #[test]
    fn incomplete_class_is_flagged() {
        let mdp = desk();
        let members = vec![vec![vec![0.5; 4], vec![0.5; 4]]];
        let class = FiniteFunctionClass::new(2, 2, 2, members).unwrap().with_reference(&mdp).unwrap();
        assert_eq!(class.is_complete(), Some(false));
        assert_eq!(class.q_star_index(), None);
    }

    #[test]
    fn rejects_out_of_range_members() {
        let members = vec![vec![vec![3.0; 4], vec![0.0; 4]]];
        assert!(FiniteFunctionClass::new(2, 2, 2, members).is_err());
    }

    #[test]
    fn confidence_set_matches_brute_force() {
        let mdp = desk();
        let class = desk_class(&mdp);
        let mut env = TabularEnv::new(mdp);
        let pi = StochasticPolicy::uniform(2, 2, 2);
        let mut rng = seeded(3);
        let data: Vec<Trajectory> = (0..40).map(|i| crate::env::rollout(&mut env, &pi, i, &mut rng)).collect();
        for beta in [0.0, 0.5, 1.0, 2.0, 5.0] {
            let mut agent = DiscGolf::new(&class, beta).unwrap();
            for (n, t) in data.iter().enumerate() {
                agent.observe(t);
                assert_eq!(agent.confidence_set(), brute_force_survivors(&class, &data[..=n], beta), "beta {beta}, n {n}");
            }
        }
    }

    #[test]
    fn larger_beta_never_shrinks_the_set() {
        let mdp = desk();
        let class = desk_class(&mdp);
        let mut env = TabularEnv::new(mdp);
        let pi = StochasticPolicy::uniform(2, 2, 2);
        let mut rng = seeded(4);
        let mut agent = DiscGolf::new(&class, 0.0).unwrap();
        for i in 0..30 {
            agent.observe(&crate::env::rollout(&mut env, &pi, i, &mut rng));
        }
        let mut previous = Vec::new();
        for beta in [0.0, 0.1, 0.3, 1.0, 3.0, 10.0] {
            agent.beta = beta;
            let set = agent.confidence_set();
            assert!(previous.iter().all(|i| set.contains(i)));
            previous = set;
        }
    }

    #[test]
    fn singleton_class_plays_optimally() {
        let mdp = desk();
        let opt = optimal_values(&mdp);
        let block = 4;
        let member = (0..2).map(|h| opt.q_table()[h * block..(h + 1) * block].to_vec()).collect();
        let class = FiniteFunctionClass::new(2, 2, 2, vec![member]).unwrap().with_reference(&mdp).unwrap();
        let mut env = TabularEnv::new(mdp);
        let (run, trace) =
            disc_golf_finite(&mut env, &class, &Dataset::empty(DatasetSource::Offline), 20, 0.0, &mut seeded(0)).unwrap();
        let greedy = opt.greedy_policy();
        for e in &run.episodes {
            assert_eq!(e.policy.as_ref(), Some(&greedy));
        }
        assert_eq!(trace.q_star_survival_rate(), Some(1.0));
        assert!(trace.episodes.iter().all(|e| e.bellman_error.unwrap() < 1e-20));
    }

    #[test]
    fn unreachable_inflation_survives_and_is_selected_only_if_it_helps() {
        // In the chain, state 1 is unreachable at h=0.
        let mdp = crate::mdp::tests::two_state_chain();
        let opt = optimal_values(&mdp);
        let q: Vec<Vec<f64>> = (0..2).map(|h| opt.q_table()[h * 4..(h + 1) * 4].to_vec()).collect();
        let mut inflated = q.clone();
        inflated[0][2] = 2.0;
        let class = FiniteFunctionClass::new(2, 2, 2, vec![q.clone(), inflated]).unwrap();
        let mut env = TabularEnv::new(mdp);
        let (_, trace) =
            disc_golf_finite(&mut env, &class, &Dataset::empty(DatasetSource::Offline), 30, 0.0, &mut seeded(2)).unwrap();
        for e in &trace.episodes {
            assert_eq!(e.survivors, vec![0, 1]);
            // f_0(s_1, .) is identical, so the tie goes to member 0.
            assert_eq!(e.selected, 0);
        }

        let mut raises = q.clone();
        raises[0][1] = 2.0;
        let class = FiniteFunctionClass::new(2, 2, 2, vec![q, raises]).unwrap();
        let (_, trace) =
            disc_golf_finite(&mut env, &class, &Dataset::empty(DatasetSource::Offline), 1, 100.0, &mut seeded(2)).unwrap();
        assert_eq!(trace.episodes[0].selected, 1);
    }

    #[test]
    fn selection_is_most_optimistic_survivor() {
        let mdp = desk();
        let class = desk_class(&mdp);
        let mut env = TabularEnv::new(mdp);
        let pi = StochasticPolicy::uniform(2, 2, 2);
        let offline = crate::agents::generate_offline_dataset(&mut env, &pi, 5, &mut seeded(8));
        let beta = beta_schedule(35, 2, 16, 0.1, 1.0);
        let (_, trace) = disc_golf_finite(&mut env, &class, &offline, 30, beta, &mut seeded(9)).unwrap();
        for e in &trace.episodes {
            let best = e
                .survivors
                .iter()
                .map(|&i| class.initial_value(i, 0))
                .fold(f64::NEG_INFINITY, f64::max);
            assert_eq!(class.initial_value(e.selected, 0), best);
            assert!(e.survivors.contains(&e.selected));
        }
    }

    #[test]
    fn empty_set_is_an_error() {
        // With zero rewards, (ones, zeros) loses at h=0 and (zeros, ones) loses
        // at h=1, so any data empties the set.
        let mdp = desk().with_rewards(vec![0.0; 8]).unwrap();
        let a = vec![vec![0.0; 4], vec![1.0; 4]];
        let b = vec![vec![1.0; 4], vec![0.0; 4]];
        let class = FiniteFunctionClass::new(2, 2, 2, vec![a, b]).unwrap();
        let mut env = TabularEnv::new(mdp);
        let result = disc_golf_finite(&mut env, &class, &Dataset::empty(DatasetSource::Offline), 5, 0.5, &mut seeded(1));
        assert!(matches!(result, Err(Error::EmptyConfidenceSet { episode: 1, .. })));
    }
}
