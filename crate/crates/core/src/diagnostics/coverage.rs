use super::Partition;
use crate::agents::RunRecord;
use crate::env::BlockEmission;
use crate::error::{Error, Result};
use crate::mdp::{max_occupancy_table, policy_occupancy, OccupancyTensor, TabularMdp, Trajectory};

/// `num / den` with `0 / 0 = 0` and `x / 0 = inf` for `x > 0`.
#[inline]
pub fn density_ratio(num: f64, den: f64) -> f64 {
    if num <= 0.0 {
        0.0
    } else if den <= 0.0 {
        f64::INFINITY
    } else {
        num / den
    }
}

/// Largest `numerator / mu` over the cells selected by `mask` (all cells when
/// `None`). An empty selection gives 0.
pub fn max_density_ratio(numerator: &[f64], mu: &OccupancyTensor, mask: Option<&[bool]>) -> f64 {
    numerator
        .iter()
        .zip(mu.density())
        .enumerate()
        .filter(|(i, _)| mask.is_none_or(|m| m[*i]))
        .map(|(_, (&n, &d))| density_ratio(n, d))
        .fold(0.0, f64::max)
}

fn check_shape(mdp: &TabularMdp, mu: &OccupancyTensor, part: &Partition) -> Result<()> {
    let shape = (mdp.num_states(), mdp.num_actions(), mdp.horizon());
    for other in [
        (mu.num_states(), mu.num_actions(), mu.horizon()),
        (part.num_states(), part.num_actions(), part.horizon()),
    ] {
        if other != shape {
            return Err(Error::InvalidParams(format!(
                "shape mismatch: MDP is (S, A, H) = {shape:?}, got {other:?}"
            )));
        }
    }
    Ok(())
}

/// All-policy partial concentrability
/// `max_{(h,s,a) in X_off} sup_pi d^pi_h(s,a) / mu_h(s,a)`.
pub fn partial_offline_concentrability(mdp: &TabularMdp, mu: &OccupancyTensor, part: &Partition) -> Result<f64> {
    check_shape(mdp, mu, part)?;
    Ok(max_density_ratio(&max_occupancy_table(mdp), mu, Some(part.offline_mask())))
}

/// Single-policy version against one comparator occupancy.
pub fn single_policy_concentrability(comparator: &OccupancyTensor, mu: &OccupancyTensor, mask: Option<&[bool]>) -> f64 {
    max_density_ratio(comparator.density(), mu, mask)
}

/// Per-episode ratio curves over the whole space and each side.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalCoverage {
    pub full: Vec<f64>,
    pub off: Vec<f64>,
    pub on: Vec<f64>,
}

impl EmpiricalCoverage {
    fn with_capacity(n: usize) -> Self {
        Self {
            full: Vec::with_capacity(n),
            off: Vec::with_capacity(n),
            on: Vec::with_capacity(n),
        }
    }

    fn push(&mut self, numerator: &[f64], denominator: &OccupancyTensor, part: &Partition) {
        self.full.push(max_density_ratio(numerator, denominator, None));
        self.off.push(max_density_ratio(numerator, denominator, Some(part.offline_mask())));
        self.on.push(max_density_ratio(numerator, denominator, Some(part.online_mask())));
    }
}

fn snapshot_occupancies(run: &RunRecord, mdp: &TabularMdp) -> Result<Vec<OccupancyTensor>> {
    run.episodes
        .iter()
        .enumerate()
        .map(|(t, e)| {
            let pi = e
                .policy
                .as_ref()
                .ok_or_else(|| Error::InvalidParams(format!("episode {t} has no policy snapshot")))?;
            Ok(policy_occupancy(mdp, &pi.to_stochastic()))
        })
        .collect()
}

/// Ratio of the executed-policy mixture occupancy (average over episodes
/// `1..=t`) to `mu`, per episode.
pub fn empirical_partition_concentrability(
    run: &RunRecord,
    mdp: &TabularMdp,
    mu: &OccupancyTensor,
    part: &Partition,
) -> Result<EmpiricalCoverage> {
    check_shape(mdp, mu, part)?;
    let occupancies = snapshot_occupancies(run, mdp)?;
    let mut sum = vec![0.0; mu.density().len()];
    let mut out = EmpiricalCoverage::with_capacity(occupancies.len());
    for (t, d) in occupancies.iter().enumerate() {
        sum.iter_mut().zip(d.density()).for_each(|(acc, x)| *acc += x);
        let mixture: Vec<f64> = sum.iter().map(|x| x / (t + 1) as f64).collect();
        out.push(&mixture, mu, part);
    }
    Ok(out)
}

/// Single-policy concentrability of the collected data against `comparator`.
///
/// After episode `t` the data distribution is
/// `(N_off mu + sum_{i<=t} d^{pi_i}) / (N_off + t)`, so an online-only run
/// is measured on its own mixture alone.
pub fn comparator_coverage(
    run: &RunRecord,
    mdp: &TabularMdp,
    mu: &OccupancyTensor,
    part: &Partition,
    comparator: &OccupancyTensor,
) -> Result<EmpiricalCoverage> {
    check_shape(mdp, mu, part)?;
    let occupancies = snapshot_occupancies(run, mdp)?;
    let n_off = run.n_off as f64;
    let mut sum: Vec<f64> = mu.density().iter().map(|m| n_off * m).collect();
    let mut out = EmpiricalCoverage::with_capacity(occupancies.len());
    for (t, d) in occupancies.iter().enumerate() {
        sum.iter_mut().zip(d.density()).for_each(|(acc, x)| *acc += x);
        let total = n_off + (t + 1) as f64;
        let data = OccupancyTensor::new_unnormalized(
            mu.num_states(),
            mu.num_actions(),
            mu.horizon(),
            sum.iter().map(|x| x / total).collect(),
        )?;
        out.push(comparator.density(), &data, part);
    }
    Ok(out)
}

/// Visit frequencies of the trajectories as an occupancy tensor.
pub fn empirical_occupancy<'a, I>(trajectories: I, num_states: usize, num_actions: usize, horizon: usize) -> Result<OccupancyTensor>
where
    I: IntoIterator<Item = &'a Trajectory>,
{
    let mut density = vec![0.0; num_states * num_actions * horizon];
    let mut n = 0usize;
    for t in trajectories {
        t.validate(horizon)?;
        for (h, st) in t.steps.iter().enumerate() {
            if st.state >= num_states || st.action >= num_actions {
                return Err(Error::InvalidParams(format!(
                    "transition (h={h}, s={}, a={}) is outside the state-action space",
                    st.state, st.action
                )));
            }
            density[(h * num_states + st.state) * num_actions + st.action] += 1.0;
        }
        n += 1;
    }
    if n == 0 {
        return Err(Error::InvalidParams("no trajectories to estimate an occupancy from".into()));
    }
    density.iter_mut().for_each(|x| *x /= n as f64);
    OccupancyTensor::new(num_states, num_actions, horizon, density)
}

/// Partial concentrability on the latent MDP, with `mu` the latent occupancy
/// of the decoded trajectories. Uses the decoder, which agents never see.
pub fn block_latent_coverage<'a, I>(trajectories: I, emission: &BlockEmission, part: &Partition) -> Result<f64>
where
    I: IntoIterator<Item = &'a Trajectory>,
{
    let latent = emission.latent();
    let decoded: Vec<Trajectory> = trajectories
        .into_iter()
        .map(|t| {
            let mut t = t.clone();
            for st in &mut t.steps {
                st.state = emission.decode(st.state);
                st.next_state = emission.decode(st.next_state);
            }
            t
        })
        .collect();
    let mu = empirical_occupancy(&decoded, latent.num_states(), latent.num_actions(), latent.horizon())?;
    partial_offline_concentrability(latent, &mu, part)
}
