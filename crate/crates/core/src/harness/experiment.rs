use std::collections::BTreeMap;
use std::time::Instant;

use nalgebra::DMatrix;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{AgentSpec, EnvSpec, ExperimentConfig, OutputFormat, ResolvedConfig};
use super::output::{curve_csv, render_svg, sha256_hex, trials_csv, ChartStyle, SvgSeries};
use crate::agents::{
    disc_golf_finite, generate_offline_dataset, lsvi_ucb_hybrid, make_behavior_policy, ucbvi_hybrid, BehaviorKind,
    ClassConstruction, ConfidenceSetTrace, FiniteFunctionClass, GolfConfig, RunRecord,
};
use crate::diagnostics::{
    aggregate_trials, average_reward_curve, block_latent_coverage, comparator_coverage,
    empirical_partition_concentrability, expected_regret_curve, partition_from_occupancy, partition_visit_curves,
    regret_curve, CovarianceTracker, Partition, SubspacePartition,
};
use crate::env::{
    block_wrap, build_forest, build_random_tabular, gram_projector, BlockEmission, Environment, FeatureMap,
    Projected, RewardScale, TabularEnv, TabularOneHot, TetrisEnv, TetrisFeatures,
};
use crate::error::{Error, Result};
use crate::mdp::{
    optimal_values, policy_occupancy, BehaviorPolicy, Dataset, DatasetSource, OccupancyTensor, OptimalValues,
    StochasticPolicy, TabularMdp, UniformPolicy,
};
use crate::rng::{seeded, stream, SimRng, Stream};

/// Largest function class the harness will enumerate.
pub const MAX_CLASS_SIZE: usize = 10_000;

/// Subspace rank and offline split used for Tetris when the config is silent.
pub const TETRIS_DEFAULT_RANK: usize = 60;
pub const TETRIS_DEFAULT_SPLIT: usize = 5;

/// How to execute an experiment.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RunOptions {
    /// Worker threads for trials; 0 or 1 runs serially.
    pub parallel: usize,
    pub format: OutputFormat,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            parallel: 1,
            format: OutputFormat::Both,
        }
    }
}

/// Environment seeds consumed by the two arms of one trial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArmPairing {
    pub behavior: String,
    pub hybrid_env_seed: u64,
    pub online_env_seed: u64,
    pub hybrid_seconds: f64,
    pub online_seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialManifest {
    pub trial: usize,
    pub seed: u64,
    pub arms: Vec<ArmPairing>,
}

/// Everything needed to audit and replay a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentManifest {
    pub experiment: String,
    pub library_version: String,
    /// The config as executed, overrides applied.
    pub config: ExperimentConfig,
    pub seed_derivation: String,
    pub trials: Vec<TrialManifest>,
    /// True when every trial's hybrid and online-only arms consumed the same
    /// environment seed.
    pub paired: bool,
    pub parallel: usize,
    pub format: OutputFormat,
    pub total_seconds: f64,
    /// SHA-256 of every CSV, keyed by file name.
    pub csv_sha256: BTreeMap<String, String>,
    /// Scalar facts about the problem (partition sizes, `V*`, class size, ...).
    pub problem: BTreeMap<String, f64>,
}

/// A finished experiment: the manifest plus file contents by name.
#[derive(Debug, Clone)]
pub struct ExperimentOutput {
    pub manifest: ExperimentManifest,
    pub files: BTreeMap<String, Vec<u8>>,
    /// Raw per-trial series: `[behavior][arm][series] -> trials`.
    pub series: BTreeMap<(String, String, String), Vec<Vec<f64>>>,
}

impl ExperimentOutput {
    /// Per-trial values of one series, e.g. `("adversarial", "hybrid", "visits_on")`.
    pub fn trials(&self, behavior: &str, arm: &str, series: &str) -> Option<&[Vec<f64>]> {
        self.series
            .get(&(behavior.to_string(), arm.to_string(), series.to_string()))
            .map(Vec::as_slice)
    }
}

pub const ARMS: [&str; 2] = ["hybrid", "online"];

/// Lifts a latent-state policy to observed contexts through the decoder.
struct DecodedPolicy<'a> {
    policy: &'a StochasticPolicy,
    emission: &'a BlockEmission,
}

impl BehaviorPolicy for DecodedPolicy<'_> {
    fn act(&self, h: usize, state: usize, rng: &mut SimRng) -> usize {
        self.policy.act(h, self.emission.decode(state), rng)
    }
}

/// Deterministic pieces shared by every trial.
struct Problem {
    env_name: String,
    spec: EnvSpec,
    /// Observed MDP for forest/random, latent MDP for block.
    mdp: Option<TabularMdp>,
    emission: Option<BlockEmission>,
    scale: RewardScale,
    optimal: Option<OptimalValues>,
    class: Option<FiniteFunctionClass>,
}

impl Problem {
    fn build(cfg: &ResolvedConfig) -> Result<Self> {
        let (mdp, emission, scale) = match &cfg.env {
            EnvSpec::Forest(p) => {
                let f = build_forest(p)?;
                (Some(f.mdp), None, f.reward_scale)
            }
            EnvSpec::Random(p) => (
                Some(build_random_tabular(p.mdp_seed, p.num_states, p.num_actions, p.horizon, p.sparsity)?),
                None,
                RewardScale::IDENTITY,
            ),
            EnvSpec::Block(p) => {
                let latent = build_random_tabular(p.mdp_seed, p.latent_states, p.num_actions, p.horizon, p.sparsity)?;
                let e = BlockEmission::uniform(latent.clone(), p.contexts_per_state)?;
                (Some(latent), Some(e), RewardScale::IDENTITY)
            }
            EnvSpec::Tetris(c) => (None, None, c.reward_scale()),
        };
        let optimal = mdp.as_ref().map(optimal_values);
        let class = match (&cfg.agent, &mdp) {
            (AgentSpec::DiscGolf(g), Some(m)) => Some(build_class(g, m)?),
            _ => None,
        };
        Ok(Self {
            env_name: cfg.raw.environment.name.clone(),
            spec: cfg.env.clone(),
            mdp,
            emission,
            scale,
            optimal,
            class,
        })
    }

    fn make_env(&self) -> Result<Box<dyn Environment>> {
        Ok(match &self.spec {
            EnvSpec::Forest(_) | EnvSpec::Random(_) => {
                Box::new(TabularEnv::with_scale(self.mdp.clone().expect("tabular"), self.scale))
            }
            EnvSpec::Block(_) => Box::new(block_wrap(self.emission.clone().expect("block"))),
            EnvSpec::Tetris(c) => Box::new(TetrisEnv::new(c.clone())?),
        })
    }

    fn is_tabular(&self) -> bool {
        matches!(self.spec, EnvSpec::Forest(_) | EnvSpec::Random(_))
    }

    fn v_star(&self) -> Option<f64> {
        let mdp = self.mdp.as_ref()?;
        self.optimal.as_ref().map(|o| o.v(0, mdp.initial_state()))
    }
}

fn build_class(g: &GolfConfig, mdp: &TabularMdp) -> Result<FiniteFunctionClass> {
    let cells = mdp.num_states() * mdp.num_actions();
    let mut rng = seeded(g.class_seed);
    let candidates: Vec<Vec<f64>> = (0..g.extra_candidates)
        .map(|_| (0..cells).map(|_| rng.random::<f64>()).collect())
        .collect();
    let size = match g.construction {
        ClassConstruction::Chains => candidates.len() + 1,
        ClassConstruction::Product => (candidates.len() + 1).saturating_pow(mdp.horizon() as u32),
    };
    if size > MAX_CLASS_SIZE {
        return Err(Error::Config(format!(
            "function class would have about {size} members (limit {MAX_CLASS_SIZE}); use construction = \"chains\" or fewer candidates"
        )));
    }
    match g.construction {
        ClassConstruction::Chains => FiniteFunctionClass::backup_chains(mdp, candidates),
        ClassConstruction::Product => FiniteFunctionClass::backup_product(mdp, candidates),
    }
}

/// Per-behavior quantities shared by every trial.
struct BehaviorContext {
    kind: BehaviorKind,
    policy: Option<StochasticPolicy>,
    mu: Option<OccupancyTensor>,
    partition: Option<Partition>,
    comparator: Option<OccupancyTensor>,
}

impl BehaviorContext {
    fn build(problem: &Problem, kind: BehaviorKind, threshold: Option<f64>) -> Self {
        match (&problem.mdp, &problem.optimal) {
            (Some(mdp), Some(opt)) => {
                let policy = make_behavior_policy(kind, opt);
                let mu = policy_occupancy(mdp, &policy);
                let partition = partition_from_occupancy(&mu, threshold);
                let comparator = policy_occupancy(mdp, &opt.greedy_policy().to_stochastic());
                Self {
                    kind,
                    policy: Some(policy),
                    mu: Some(mu),
                    partition: Some(partition),
                    comparator: Some(comparator),
                }
            }
            _ => Self {
                kind,
                policy: None,
                mu: None,
                partition: None,
                comparator: None,
            },
        }
    }

    fn collect(&self, problem: &Problem, env: &mut dyn Environment, n: usize, rng: &mut SimRng) -> Dataset {
        match (&self.policy, &problem.emission) {
            (Some(p), Some(e)) => generate_offline_dataset(env, &DecodedPolicy { policy: p, emission: e }, n, rng),
            (Some(p), None) => generate_offline_dataset(env, p, n, rng),
            (None, _) => generate_offline_dataset(
                env,
                &UniformPolicy {
                    num_actions: env.num_actions(),
                },
                n,
                rng,
            ),
        }
    }
}

type Series = BTreeMap<String, Vec<f64>>;

struct ArmOutcome {
    series: Series,
    env_seed: u64,
    seconds: f64,
}

struct TrialOutcome {
    trial: usize,
    seed: u64,
    /// `[behavior][arm]`.
    arms: Vec<[ArmOutcome; 2]>,
}

struct LinearSetup {
    features: Box<dyn FeatureMap>,
    partition: Option<SubspacePartition>,
}

fn linear_setup(problem: &Problem, cfg: &ResolvedConfig, offline: &Dataset) -> Result<LinearSetup> {
    let base: Box<dyn FeatureMap> = match &problem.spec {
        EnvSpec::Tetris(c) => Box::new(TetrisFeatures::new(c.clone())),
        EnvSpec::Block(p) => Box::new(TabularOneHot {
            num_states: p.latent_states * p.contexts_per_state,
            num_actions: p.num_actions,
        }),
        _ => {
            let mdp = problem.mdp.as_ref().expect("tabular");
            Box::new(TabularOneHot {
                num_states: mdp.num_states(),
                num_actions: mdp.num_actions(),
            })
        }
    };
    let is_tetris = matches!(problem.spec, EnvSpec::Tetris(_));
    let rank = cfg.raw.partition.rank.or(is_tetris.then_some(TETRIS_DEFAULT_RANK));
    let Some(rank) = rank else {
        return Ok(LinearSetup {
            features: base,
            partition: None,
        });
    };
    let split = cfg.raw.partition.split.unwrap_or(TETRIS_DEFAULT_SPLIT).min(rank);
    let d = base.dim();
    let mut gram = DMatrix::zeros(d, d);
    let mut rows = 0;
    for t in offline.trajectories() {
        for st in &t.steps {
            let phi = base.embed(st.state, st.action);
            let nz: Vec<(usize, f64)> = phi.iter().copied().enumerate().filter(|(_, v)| *v != 0.0).collect();
            for &(i, vi) in &nz {
                for &(j, vj) in &nz {
                    gram[(i, j)] += vi * vj;
                }
            }
            rows += 1;
        }
    }
    let projector = gram_projector(gram, rows, rank)?;
    Ok(LinearSetup {
        features: Box::new(Projected { inner: base, projector }),
        partition: Some(SubspacePartition::coordinates(rank, split)?),
    })
}

fn run_arm(
    problem: &Problem,
    cfg: &ResolvedConfig,
    env: &mut dyn Environment,
    offline: &Dataset,
    linear: Option<&LinearSetup>,
    rng: &mut SimRng,
) -> Result<(RunRecord, Option<ConfidenceSetTrace>)> {
    let n_on = cfg.raw.n_on;
    let horizon = env.horizon();
    match &cfg.agent {
        AgentSpec::Ucbvi(c) => Ok((ucbvi_hybrid(env, offline, n_on, c, rng)?, None)),
        AgentSpec::LsviUcb(c) => {
            let features = &linear.expect("linear setup").features;
            Ok((lsvi_ucb_hybrid(features, env, offline, n_on, c, rng)?, None))
        }
        AgentSpec::DiscGolf(g) => {
            let class = problem.class.as_ref().expect("class");
            let beta = g.resolve_beta(offline.len() + n_on, horizon, class.len())?;
            let (run, trace) = disc_golf_finite(env, class, offline, n_on, beta, rng)?;
            Ok((run, Some(trace)))
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn arm_metrics(
    problem: &Problem,
    cfg: &ResolvedConfig,
    ctx: &BehaviorContext,
    offline: &Dataset,
    run: &RunRecord,
    trace: Option<&ConfidenceSetTrace>,
    linear: Option<&LinearSetup>,
) -> Result<Series> {
    let mut out = Series::new();
    for metric in &cfg.raw.metrics {
        match metric.as_str() {
            "avg_reward" => {
                out.insert("avg_reward".into(), average_reward_curve(run));
            }
            "regret" => {
                let v_star = problem.v_star().expect("tabular oracle");
                out.insert("regret".into(), regret_curve(run, v_star));
                if problem.is_tabular() && run.episodes.iter().all(|e| e.policy.is_some()) {
                    let mdp = problem.mdp.as_ref().expect("tabular");
                    out.insert("expected_regret".into(), expected_regret_curve(run, mdp, v_star)?);
                }
            }
            "visits" => {
                let part = ctx.partition.as_ref().expect("tabular partition");
                let (off, on) = partition_visit_curves(run, part);
                out.insert("visits_off".into(), off);
                out.insert("visits_on".into(), on);
            }
            "coverage" => {
                let mdp = problem.mdp.as_ref().expect("tabular");
                let (mu, part) = (ctx.mu.as_ref().expect("mu"), ctx.partition.as_ref().expect("partition"));
                let mix = empirical_partition_concentrability(run, mdp, mu, part)?;
                out.insert("coverage_full".into(), mix.full);
                out.insert("coverage_off".into(), mix.off);
                out.insert("coverage_on".into(), mix.on);
                let single = comparator_coverage(run, mdp, mu, part, ctx.comparator.as_ref().expect("comparator"))?;
                out.insert("single_full".into(), single.full);
                out.insert("single_off".into(), single.off);
                out.insert("single_on".into(), single.on);
            }
            "eig_coverage" => {
                let setup = linear.expect("linear setup");
                let part = setup.partition.as_ref().ok_or_else(|| {
                    Error::Config("eig_coverage needs a projected feature space (set partition.rank)".into())
                })?;
                let mut tracker = CovarianceTracker::new(setup.features.dim());
                let (mut full, mut off, mut on) = (Vec::new(), Vec::new(), Vec::new());
                for t in run.trajectories() {
                    t.steps.iter().for_each(|st| tracker.push(&setup.features.embed(st.state, st.action)));
                    let p = tracker.point(part)?.inverse();
                    full.push(p.full);
                    off.push(p.off);
                    on.push(p.on);
                }
                out.insert("eig_full".into(), full);
                out.insert("eig_off".into(), off);
                out.insert("eig_on".into(), on);
            }
            "confidence_set" => {
                let trace = trace.expect("golf trace");
                let flag = |e: &crate::agents::GolfEpisode| f64::from(u8::from(e.q_star_survived.unwrap_or(false)));
                out.insert("qstar_in_set".into(), trace.episodes.iter().map(flag).collect());
                out.insert(
                    "survivors".into(),
                    trace.episodes.iter().map(|e| e.survivors.len() as f64).collect(),
                );
                out.insert(
                    "bellman_error".into(),
                    trace.episodes.iter().map(|e| e.bellman_error.unwrap_or(f64::NAN)).collect(),
                );
            }
            "latent_coverage" => {
                let emission = problem.emission.as_ref().expect("block");
                let part = ctx.partition.as_ref().expect("latent partition");
                let mut seen: Vec<&crate::mdp::Trajectory> = offline.trajectories().iter().collect();
                let mut curve = Vec::with_capacity(run.episodes.len());
                for t in run.trajectories() {
                    seen.push(t);
                    curve.push(block_latent_coverage(seen.iter().copied(), emission, part)?);
                }
                out.insert("latent_coverage".into(), curve);
            }
            other => return Err(Error::Internal(format!("metric `{other}` passed validation but has no handler"))),
        }
    }
    Ok(out)
}

fn run_trial(problem: &Problem, cfg: &ResolvedConfig, contexts: &[BehaviorContext], trial: usize) -> Result<TrialOutcome> {
    let seed = cfg.raw.base_seed.wrapping_add(trial as u64);
    let mut arms = Vec::with_capacity(contexts.len());
    for ctx in contexts {
        let mut env = problem.make_env()?;
        let offline = ctx.collect(problem, env.as_mut(), cfg.raw.n_off, &mut stream(seed, Stream::Offline));
        let linear = match cfg.agent {
            AgentSpec::LsviUcb(_) => Some(linear_setup(problem, cfg, &offline)?),
            _ => None,
        };
        let empty = Dataset::empty(DatasetSource::Offline);
        let mut outcomes = Vec::with_capacity(2);
        for data in [&offline, &empty] {
            let start = Instant::now();
            let mut env = problem.make_env()?;
            let mut rng = stream(seed, Stream::Online);
            let (run, trace) = run_arm(problem, cfg, env.as_mut(), data, linear.as_ref(), &mut rng)?;
            let run = run.with_labels(&problem.env_name, seed);
            let series = arm_metrics(problem, cfg, ctx, data, &run, trace.as_ref(), linear.as_ref())?;
            outcomes.push(ArmOutcome {
                series,
                env_seed: run.seed,
                seconds: start.elapsed().as_secs_f64(),
            });
        }
        let online = outcomes.pop().expect("two arms");
        let hybrid = outcomes.pop().expect("two arms");
        arms.push([hybrid, online]);
    }
    Ok(TrialOutcome { trial, seed, arms })
}

fn behavior_names(cfg: &ResolvedConfig) -> Vec<&'static str> {
    cfg.behaviors.iter().map(|b| b.name()).collect()
}

fn y_label(series: &str) -> &'static str {
    match series {
        s if s.starts_with("visits") => "cumulative visits",
        s if s.starts_with("coverage") || s.starts_with("single") => "concentrability",
        s if s.starts_with("eig") => "inverse eigenvalue",
        "avg_reward" => "average reward per step",
        s if s.contains("regret") => "cumulative regret",
        "latent_coverage" => "latent concentrability",
        "qstar_in_set" => "Q* in confidence set",
        "survivors" => "confidence set size",
        "bellman_error" => "in-sample Bellman error",
        _ => "",
    }
}

/// Runs every trial and arm and renders outputs in memory.
pub fn run_experiment(config: &ExperimentConfig, options: &RunOptions) -> Result<ExperimentOutput> {
    let started = Instant::now();
    let cfg = config.resolve()?;
    let problem = Problem::build(&cfg)?;
    let contexts: Vec<BehaviorContext> = cfg
        .behaviors
        .iter()
        .map(|&k| BehaviorContext::build(&problem, k, cfg.raw.partition.threshold))
        .collect();

    let trials = cfg.raw.trials;
    let outcomes: Vec<TrialOutcome> = if options.parallel <= 1 {
        (0..trials)
            .map(|t| run_trial(&problem, &cfg, &contexts, t).map_err(|e| wrap_trial(t, e)))
            .collect::<Result<_>>()?
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(options.parallel)
            .build()
            .map_err(|e| Error::Internal(format!("cannot start worker pool: {e}")))?;
        pool.install(|| {
            (0..trials)
                .into_par_iter()
                .map(|t| run_trial(&problem, &cfg, &contexts, t).map_err(|e| wrap_trial(t, e)))
                .collect::<Result<Vec<_>>>()
        })?
    };

    // Serial reduce in trial order.
    let mut series: BTreeMap<(String, String, String), Vec<Vec<f64>>> = BTreeMap::new();
    for outcome in &outcomes {
        for (b, pair) in behavior_names(&cfg).iter().zip(&outcome.arms) {
            for (arm, result) in ARMS.iter().zip(pair) {
                for (name, values) in &result.series {
                    series
                        .entry((b.to_string(), arm.to_string(), name.clone()))
                        .or_default()
                        .push(values.clone());
                }
            }
        }
    }

    let prefix = format!("{}_{}", cfg.raw.name, cfg.agent.name());
    let mut files = BTreeMap::new();
    let mut csv_sha256 = BTreeMap::new();
    let mut charts: BTreeMap<(String, String), Vec<SvgSeries>> = BTreeMap::new();
    for ((behavior, arm, name), curves) in &series {
        let curve = aggregate_trials(curves)?;
        let stem = format!("{prefix}_{name}_{behavior}_{arm}");
        for (file, body) in [
            (format!("{stem}.csv"), curve_csv(&curve)),
            (format!("{stem}_trials.csv"), trials_csv(curves)),
        ] {
            csv_sha256.insert(file.clone(), sha256_hex(body.as_bytes()));
            if options.format.csv() {
                files.insert(file, body.into_bytes());
            }
        }
        charts
            .entry((name.clone(), behavior.clone()))
            .or_default()
            .push(SvgSeries::from_curve(arm, &curve));
    }
    if options.format.svg() {
        for ((name, behavior), lines) in &charts {
            let style = ChartStyle {
                title: format!("{} {} ({} behavior, {} trials)", cfg.raw.name, name, behavior, trials),
                y_label: y_label(name).into(),
                ..ChartStyle::default()
            };
            files.insert(format!("{prefix}_{name}_{behavior}.svg"), render_svg(lines, &style)?.into_bytes());
        }
    }

    let names = behavior_names(&cfg);
    let trial_manifests: Vec<TrialManifest> = outcomes
        .iter()
        .map(|o| TrialManifest {
            trial: o.trial,
            seed: o.seed,
            arms: names
                .iter()
                .zip(&o.arms)
                .map(|(b, [h, on])| ArmPairing {
                    behavior: b.to_string(),
                    hybrid_env_seed: h.env_seed,
                    online_env_seed: on.env_seed,
                    hybrid_seconds: h.seconds,
                    online_seconds: on.seconds,
                })
                .collect(),
        })
        .collect();
    let paired = trial_manifests
        .iter()
        .all(|t| t.arms.iter().all(|a| a.hybrid_env_seed == a.online_env_seed && a.hybrid_env_seed == t.seed));

    let mut facts = BTreeMap::new();
    if let Some(v) = problem.v_star() {
        facts.insert("v_star".into(), v);
    }
    for ctx in &contexts {
        if let Some(p) = &ctx.partition {
            facts.insert(format!("partition_offline_size_{}", ctx.kind.name()), p.offline_size() as f64);
            facts.insert(format!("partition_online_size_{}", ctx.kind.name()), p.online_size() as f64);
        }
        if let (Some(mdp), Some(mu), Some(p)) = (&problem.mdp, &ctx.mu, &ctx.partition) {
            let c = crate::diagnostics::partial_offline_concentrability(mdp, mu, p)?;
            facts.insert(format!("partial_concentrability_{}", ctx.kind.name()), c);
        }
    }
    if let Some(class) = &problem.class {
        facts.insert("class_size".into(), class.len() as f64);
    }

    let manifest = ExperimentManifest {
        experiment: cfg.raw.name.clone(),
        library_version: env!("CARGO_PKG_VERSION").into(),
        config: cfg.raw.clone(),
        seed_derivation: "trial seed = base_seed + trial_index; ChaCha8 stream 1 draws offline data, stream 2 drives \
                          the online episodes of both arms"
            .into(),
        trials: trial_manifests,
        paired,
        parallel: options.parallel.max(1),
        format: options.format,
        total_seconds: started.elapsed().as_secs_f64(),
        csv_sha256,
        problem: facts,
    };
    Ok(ExperimentOutput { manifest, files, series })
}

fn wrap_trial(trial: usize, e: Error) -> Error {
    if e.is_config_error() {
        e
    } else {
        Error::Trial {
            trial,
            source: Box::new(e),
        }
    }
}
