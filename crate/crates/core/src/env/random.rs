use rand::Rng;
use rand_distr::{Distribution, Gamma};

use crate::error::{Error, Result};
use crate::mdp::{argmax, TabularMdp};
use crate::rng::seeded;

/// Random tabular MDP with Dirichlet transition rows and uniform rewards.
///
/// Rows are drawn from a symmetric Dirichlet with concentration
/// `1 - sparsity`. At `sparsity >= 1` the Dirichlet degenerates and each row
/// becomes a one-hot vector at the argmax of unit-rate Gamma draws. The start
/// state is always 0.
pub fn build_random_tabular(
    seed: u64,
    num_states: usize,
    num_actions: usize,
    horizon: usize,
    sparsity: f64,
) -> Result<TabularMdp> {
    if num_states == 0 || num_actions == 0 || horizon == 0 {
        return Err(Error::InvalidParams("S, A and H must be at least 1".into()));
    }
    if !(0.0..=1.0).contains(&sparsity) {
        return Err(Error::InvalidParams(format!("sparsity {sparsity} outside [0, 1]")));
    }
    let mut rng = seeded(seed);
    let degenerate = sparsity >= 1.0;
    let gamma = Gamma::new(if degenerate { 1.0 } else { 1.0 - sparsity }, 1.0)
        .map_err(|e| Error::InvalidParams(e.to_string()))?;

    let cells = horizon * num_states * num_actions;
    let mut transition = Vec::with_capacity(cells * num_states);
    let mut reward = Vec::with_capacity(cells);
    for _ in 0..cells {
        let draws: Vec<f64> = (0..num_states).map(|_| gamma.sample(&mut rng)).collect();
        let total: f64 = draws.iter().sum();
        if degenerate || !(total > 0.0 && total.is_finite()) {
            let hot = argmax(&draws);
            transition.extend((0..num_states).map(|i| if i == hot { 1.0 } else { 0.0 }));
        } else {
            let start = transition.len();
            transition.extend(draws.iter().map(|x| x / total));
            // Push the rounding residue onto the largest entry.
            let row = &mut transition[start..];
            let residue = 1.0 - row.iter().sum::<f64>();
            let big = argmax(row);
            row[big] += residue;
        }
        reward.push(rng.random::<f64>());
    }
    TabularMdp::new(num_states, num_actions, horizon, 0, transition, reward)
}
