mod common;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tssn_core::sampler::{
    generate_corpus_with_threads, joint_step_distribution, RoleMode, StepContext, TokenMode, WalkConfig, Walker,
};
use tssn_core::tssn::TssnVertex;
use tssn_core::TssnGraph;

use common::{graph, random_log, random_walk_config, Oracle, EPS};

/// Every `(previous, current)` a walk can be in, plus every first step.
fn contexts(g: &TssnGraph) -> Vec<StepContext> {
    let mut out = Vec::new();
    for s in 0..g.state_count() as u32 {
        let current = g.vertex(s);
        out.push(StepContext {
            current,
            previous: None,
        });
        for a in g.arcs(s) {
            out.push(StepContext {
                current: g.vertex(a.to),
                previous: Some(current),
            });
        }
    }
    out
}

fn probs(g: &TssnGraph, ctx: &StepContext, cfg: &WalkConfig) -> Vec<f64> {
    joint_step_distribution(g, ctx, cfg)
        .unwrap()
        .map(|d| d.probs)
        .unwrap_or_default()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn distributions_match_brute_force(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (edges, roles) = random_log(&mut rng, 8, 3, 24);
        let cfg = random_walk_config(&mut rng);
        let g = graph(&edges, &roles, EPS);
        let oracle = Oracle::new(&edges, &roles, EPS);
        for ctx in contexts(&g) {
            let expected = oracle.distribution(
                ctx.previous.map(|p| (p.base, p.snap)),
                (ctx.current.base, ctx.current.snap),
                &cfg,
            );
            let Some(d) = joint_step_distribution(&g, &ctx, &cfg).unwrap() else {
                prop_assert!(expected.is_empty());
                continue;
            };
            prop_assert!((d.probs.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            prop_assert_eq!(d.edges.len(), expected.len());
            for (e, p) in d.edges.iter().zip(&d.probs) {
                prop_assert!(e.time_accessibility() >= 0);
                let q = expected[&(e.dst.base, e.dst.snap)];
                prop_assert!((p - q).abs() < 1e-9, "{} vs {}", p, q);
            }
        }
    }

    #[test]
    fn neutral_role_bias_is_unbiased(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (edges, roles) = random_log(&mut rng, 8, 3, 24);
        let g = graph(&edges, &roles, EPS);
        let mut cfg = random_walk_config(&mut rng);
        cfg.beta = 0.5;
        cfg.role_mode = RoleMode::Biased;
        let unbiased = WalkConfig { role_mode: RoleMode::Unbiased, ..cfg.clone() };
        for ctx in contexts(&g) {
            prop_assert_eq!(probs(&g, &ctx, &cfg), probs(&g, &ctx, &unbiased));
        }
    }

    #[test]
    fn alpha_is_inert_without_self_connections(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (edges, roles) = random_log(&mut rng, 8, 1, 24);
        let g = graph(&edges, &roles, EPS);
        prop_assert!(g.self_connections().is_empty());
        let cfg = random_walk_config(&mut rng);
        for ctx in contexts(&g) {
            let base = probs(&g, &ctx, &cfg);
            for alpha in [0.1, 0.3, 0.7, 0.9] {
                prop_assert_eq!(&probs(&g, &ctx, &WalkConfig { alpha, ..cfg.clone() }), &base);
            }
        }
    }

    #[test]
    fn static_unbiased_walks_follow_edge_weights(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (edges, roles) = random_log(&mut rng, 8, 1, 24);
        let g = graph(&edges, &roles, EPS);
        let cfg = WalkConfig { alpha: rng.gen_range(0.1..=0.9), ..WalkConfig::default() };
        for ctx in contexts(&g) {
            let s = g.state_of(ctx.current).unwrap();
            let w: Vec<f64> = g.arcs(s).iter().map(|a| a.weight).collect();
            let total: f64 = w.iter().sum();
            let expected: Vec<f64> = w.iter().map(|x| x / total).collect();
            prop_assert_eq!(probs(&g, &ctx, &cfg), expected);
        }
    }

    #[test]
    fn same_role_mass_grows_with_beta(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (edges, roles) = random_log(&mut rng, 8, 3, 24);
        let g = graph(&edges, &roles, EPS);
        let mut cfg = random_walk_config(&mut rng);
        cfg.role_mode = RoleMode::Biased;
        for ctx in contexts(&g) {
            let reference = g.role(ctx.previous.unwrap_or(ctx.current).base);
            let d = joint_step_distribution(&g, &ctx, &cfg).unwrap().unwrap();
            let same: Vec<bool> = d.edges.iter().map(|e| g.role(e.dst.base) == reference).collect();
            if same.iter().all(|&s| s) || same.iter().all(|&s| !s) {
                continue;
            }
            let mass = |beta: f64| -> f64 {
                probs(&g, &ctx, &WalkConfig { beta, ..cfg.clone() })
                    .iter()
                    .zip(&same)
                    .filter(|(_, &s)| s)
                    .map(|(p, _)| p)
                    .sum()
            };
            let masses: Vec<f64> = (1..=9).map(|i| mass(i as f64 / 10.0)).collect();
            prop_assert!(masses.windows(2).all(|w| w[0] < w[1]), "{:?}", masses);
        }
    }

    #[test]
    fn walks_move_forward_along_stored_edges(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (edges, roles) = random_log(&mut rng, 8, 3, 24);
        let g = graph(&edges, &roles, EPS);
        let oracle = Oracle::new(&edges, &roles, EPS);
        let cfg = WalkConfig { walk_length: 12, ..random_walk_config(&mut rng) };
        let mut walker = Walker::new(&g, &cfg);
        for s in 0..g.state_count() as u32 {
            let walk = walker.walk(s, &mut rng);
            for pair in walk.states.windows(2) {
                let (a, b): (TssnVertex, TssnVertex) = (pair[0], pair[1]);
                prop_assert!(a.snap <= b.snap);
                let stored = oracle
                    .accessible((a.base, a.snap))
                    .iter()
                    .any(|&(x, _, _)| x == (b.base, b.snap));
                prop_assert!(stored);
            }
        }
    }
}

#[test]
fn corpus_does_not_depend_on_thread_count() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let (edges, roles) = random_log(&mut rng, 8, 3, 40);
    let g = graph(&edges, &roles, EPS);
    for token_mode in [TokenMode::BaseId, TokenMode::SnapshotId] {
        let cfg = WalkConfig {
            walk_length: 10,
            walks_per_vertex: 4,
            token_mode,
            seed: 3,
            ..random_walk_config(&mut rng)
        };
        let one = generate_corpus_with_threads(&g, &cfg, 1).unwrap();
        let four = generate_corpus_with_threads(&g, &cfg, 4).unwrap();
        assert_eq!(one, four);
        let uncached = WalkConfig {
            cache_capacity: 0,
            ..cfg.clone()
        };
        assert_eq!(generate_corpus_with_threads(&g, &uncached, 3).unwrap(), one);
    }
}
