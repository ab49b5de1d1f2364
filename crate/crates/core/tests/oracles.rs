use std::path::Path;

use hybrid_rl::agents::{make_behavior_policy, BehaviorKind};
use hybrid_rl::diagnostics::{block_latent_coverage, partition_from_occupancy, Partition};
use hybrid_rl::env::{block_wrap, build_forest, build_random_tabular, rollout, BlockEmission, ForestParams};
use hybrid_rl::harness::{render_svg, ChartStyle, SvgSeries};
use hybrid_rl::mdp::{optimal_values, policy_occupancy, DeterministicPolicy, StochasticPolicy, TabularMdp, Trajectory};
use hybrid_rl::rng::seeded;

// Scaled rewards; computed with a standalone numpy backward induction and forward recursion.
const FOREST_V_STAR: f64 = 12.438;
const FOREST_OFFLINE_CELLS: [(BehaviorKind, usize); 3] =
    [(BehaviorKind::Adversarial, 41), (BehaviorKind::Uniform, 42), (BehaviorKind::Optimal, 21)];

#[test]
fn forest_optimal_value_and_partitions() {
    let forest = build_forest(&ForestParams::default()).unwrap();
    let opt = optimal_values(&forest.mdp);
    assert!((opt.v(0, 0) - FOREST_V_STAR).abs() < 1e-9);

    for (kind, size) in FOREST_OFFLINE_CELLS {
        let mu = policy_occupancy(&forest.mdp, &make_behavior_policy(kind, &opt));
        let part = partition_from_occupancy(&mu, None);
        assert_eq!(part.offline_size(), size, "{kind:?}");
        assert_eq!(part.online_size(), 20 * 4 * 2 - size, "{kind:?}");
    }
}

fn occupancy(mdp: &TabularMdp, pi: &DeterministicPolicy) -> Vec<f64> {
    let (ns, na) = (mdp.num_states(), mdp.num_actions());
    let mut out = vec![0.0; mdp.horizon() * ns * na];
    let mut d = vec![0.0; ns];
    d[mdp.initial_state()] = 1.0;
    for h in 0..mdp.horizon() {
        let mut next = vec![0.0; ns];
        for s in 0..ns {
            let a = pi.action(h, s);
            out[(h * ns + s) * na + a] = d[s];
            for (t, p) in mdp.next_state_probs(h, s, a).iter().enumerate() {
                next[t] += d[s] * p;
            }
        }
        d = next;
    }
    out
}

#[test]
fn block_latent_coverage_matches_brute_force() {
    let latent = build_random_tabular(9, 2, 2, 3, 0.4).unwrap();
    let (ns, na, nh) = (2, 2, 3);
    let emission = BlockEmission::uniform(latent.clone(), 3).unwrap();
    let mut env = block_wrap(emission.clone());
    let contexts = emission.num_contexts();
    let behavior = StochasticPolicy::uniform(contexts, na, nh);
    let mut rng = seeded(4);
    let data: Vec<Trajectory> = (0..400).map(|i| rollout(&mut env, &behavior, i, &mut rng)).collect();

    let mut counts = vec![0.0; nh * ns * na];
    for t in &data {
        for (h, st) in t.steps.iter().enumerate() {
            counts[(h * ns + emission.decode(st.state)) * na + st.action] += 1.0;
        }
    }
    let mu: Vec<f64> = counts.iter().map(|c| c / data.len() as f64).collect();
    let mut best = vec![0.0f64; nh * ns * na];
    for pi in DeterministicPolicy::enumerate(ns, na, nh) {
        best.iter_mut().zip(occupancy(&latent, &pi)).for_each(|(b, o)| *b = b.max(o));
    }

    let mut rng = seeded(8);
    for _ in 0..20 {
        let off: Vec<bool> = (0..nh * ns * na).map(|_| rand::Rng::random::<f64>(&mut rng) < 0.5).collect();
        let expected = off
            .iter()
            .enumerate()
            .filter(|(_, &o)| o)
            .map(|(i, _)| match (best[i], mu[i]) {
                (b, _) if b == 0.0 => 0.0,
                (_, m) if m == 0.0 => f64::INFINITY,
                (b, m) => b / m,
            })
            .fold(0.0, f64::max);
        let part = Partition::from_offline(ns, na, nh, off).unwrap();
        let got = block_latent_coverage(&data, &emission, &part).unwrap();
        assert!(got == expected || (got - expected).abs() <= 1e-9 * expected, "{got} vs {expected}");
    }
}

#[test]
fn chart_matches_golden_file() {
    let n = 12;
    let mean: Vec<f64> = (0..n).map(|t| (t as f64 * 0.7).sin() + t as f64 * 0.1).collect();
    let series = vec![
        SvgSeries {
            label: "hybrid".into(),
            lo: mean.iter().map(|m| m - 0.3).collect(),
            hi: mean.iter().map(|m| m + 0.3).collect(),
            mean: mean.clone(),
        },
        SvgSeries {
            label: "online".into(),
            lo: mean.iter().map(|m| 0.5 * m - 0.1).collect(),
            hi: mean.iter().map(|m| 0.5 * m + 0.1).collect(),
            mean: mean.iter().map(|m| 0.5 * m).collect(),
        },
    ];
    let style = ChartStyle {
        title: "coverage <forest>".into(),
        y_label: "ratio".into(),
        ..ChartStyle::default()
    };
    let svg = render_svg(&series, &style).unwrap();
    let golden = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden/chart.svg");
    if std::env::var_os("BLESS").is_some() {
        std::fs::create_dir_all(golden.parent().unwrap()).unwrap();
        std::fs::write(&golden, &svg).unwrap();
    }
    assert_eq!(svg, std::fs::read_to_string(golden).unwrap());
}
