//! Coverage and complexity diagnostics: partitions, partial concentrability,
//! visit and eigenvalue coverage curves, regret, and trial aggregation.
//!
//! Density ratios follow `0/0 = 0` and `x/0 = inf`. Infinite values stay
//! infinite in data and are capped at [`PLOT_CAP`] only when drawn.

mod coverage;
mod curves;
mod partition;
mod stats;

pub use coverage::{
    block_latent_coverage, comparator_coverage, density_ratio, empirical_occupancy, empirical_partition_concentrability,
    max_density_ratio, partial_offline_concentrability, single_policy_concentrability, EmpiricalCoverage,
};
pub use curves::{
    average_reward_curve, covariance_eig_curves, expected_regret_curve, partition_visit_curves, regret_curve,
    CovarianceTracker, EigenPoint,
};
pub use partition::{partition_from_occupancy, Partition, SubspacePartition};
pub use stats::{
    aggregate_trials, mean_interval, paired_difference, slope_interval, CoverageCurve, MeanInterval, BAND_Z, PLOT_CAP,
};
