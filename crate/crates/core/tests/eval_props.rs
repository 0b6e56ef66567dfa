mod common;

use std::collections::HashSet;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tssn_core::eval::logreg::objective_gradient;
use tssn_core::eval::{
    edge_feature, make_split, run_experiment, run_experiment_with, train_logreg, CorpusSource, EvalError,
    ExperimentConfig, FeatureOp, LogRegConfig, Protocol, SplitSpec, TokenCorpus,
};
use tssn_core::sampler::WalkConfig;
use tssn_core::stats::{generate_synthetic, SyntheticSpec};
use tssn_core::{RoleTable, TemporalEdgeList, TrainConfig};

use common::{plain_first_order_walks, random_log};

proptest! {
    #[test]
    fn split_sets_are_disjoint(seed in any::<u64>(), time_preserving in any::<bool>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (edges, roles) = random_log(&mut rng, 12, 3, 30);
        let spec = SplitSpec {
            protocol: if time_preserving { Protocol::TimePreserving } else { Protocol::Traditional },
            ..SplitSpec::default()
        };
        let split = match make_split(&edges, &roles, &spec, &mut rng) {
            Ok(s) => s,
            Err(EvalError::TooFewNegatives { .. } | EvalError::NoPositives) => return Ok(()),
            Err(e) => return Err(TestCaseError::fail(e.to_string())),
        };
        let all: HashSet<(u32, u32)> = edges.distinct_pairs().into_iter().collect();
        let train: HashSet<(u32, u32)> = split.train.distinct_pairs().into_iter().collect();
        let negatives: HashSet<(u32, u32)> = split.negatives.iter().copied().collect();
        prop_assert_eq!(negatives.len(), split.negatives.len());
        prop_assert_eq!(split.negatives.len(), split.positives.len());
        for p in &split.positives {
            prop_assert!(all.contains(p));
            prop_assert!(!train.contains(p));
        }
        for n in &split.negatives {
            prop_assert!(n.0 < n.1);
            prop_assert!(!all.contains(n));
        }
    }

    #[test]
    fn edge_features_are_symmetric(
        a in prop::collection::vec(-3.0f64..3.0, 5),
        b in prop::collection::vec(-3.0f64..3.0, 5),
    ) {
        for op in [FeatureOp::Average, FeatureOp::Hadamard] {
            prop_assert_eq!(edge_feature(&a, &b, op), edge_feature(&b, &a, op));
        }
    }
}

/// Solves the 3x3 system `m x = v` by Gaussian elimination with pivoting.
#[allow(clippy::needless_range_loop)]
fn solve3(mut m: [[f64; 3]; 3], mut v: [f64; 3]) -> [f64; 3] {
    for col in 0..3 {
        let pivot = (col..3)
            .max_by(|&i, &j| m[i][col].abs().total_cmp(&m[j][col].abs()))
            .unwrap();
        m.swap(col, pivot);
        v.swap(col, pivot);
        for row in col + 1..3 {
            let f = m[row][col] / m[col][col];
            for k in col..3 {
                m[row][k] -= f * m[col][k];
            }
            v[row] -= f * v[col];
        }
    }
    let mut x = [0.0; 3];
    for row in (0..3).rev() {
        let s: f64 = (row + 1..3).map(|k| m[row][k] * x[k]).sum();
        x[row] = (v[row] - s) / m[row][row];
    }
    x
}

/// Newton's method on the same penalized objective.
fn newton(features: &[Vec<f64>], labels: &[bool], l2: f64) -> [f64; 3] {
    let n = features.len() as f64;
    let mut theta = [0.0; 3];
    for _ in 0..100 {
        let mut grad = [0.0; 3];
        let mut hess = [[0.0; 3]; 3];
        for (x, &y) in features.iter().zip(labels) {
            let xt = [x[0], x[1], 1.0];
            let z: f64 = (0..3).map(|k| theta[k] * xt[k]).sum();
            let p = 1.0 / (1.0 + (-z).exp());
            let r = p - if y { 1.0 } else { 0.0 };
            for i in 0..3 {
                grad[i] += r * xt[i] / n;
                for j in 0..3 {
                    hess[i][j] += p * (1.0 - p) * xt[i] * xt[j] / n;
                }
            }
        }
        for i in 0..2 {
            grad[i] += l2 * theta[i];
            hess[i][i] += l2;
        }
        let step = solve3(hess, grad);
        for i in 0..3 {
            theta[i] -= step[i];
        }
    }
    theta
}

#[test]
fn logistic_regression_matches_newton() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for l2 in [1e-4, 1e-2, 0.1] {
        let features: Vec<Vec<f64>> = (0..20)
            .map(|_| vec![rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)])
            .collect();
        // Noisy labels keep the optimum finite.
        let labels: Vec<bool> = features
            .iter()
            .map(|x| x[0] - 0.5 * x[1] + rng.gen_range(-1.5..1.5) > 0.0)
            .collect();
        let model = train_logreg(
            &features,
            &labels,
            &LogRegConfig {
                l2,
                ..LogRegConfig::default()
            },
        )
        .unwrap();
        let reference = newton(&features, &labels, l2);
        let fitted = [model.weights[0], model.weights[1], model.bias];
        for (a, b) in fitted.iter().zip(&reference) {
            assert!((a - b).abs() < 1e-3, "l2 {l2}: {fitted:?} vs {reference:?}");
        }
        let g = objective_gradient(&features, &labels, l2, &reference[..2], reference[2]);
        assert!(g.iter().all(|x| x.abs() < 1e-10), "reference is not stationary: {g:?}");
    }
}

/// The static-graph walker of the shared test helpers as a corpus source.
struct PlainFirstOrder;

impl CorpusSource for PlainFirstOrder {
    fn corpus(
        &self,
        train: &TemporalEdgeList,
        _roles: &RoleTable,
        _cfg: &ExperimentConfig,
        walk: &WalkConfig,
    ) -> Result<TokenCorpus, EvalError> {
        Ok(TokenCorpus {
            walks: plain_first_order_walks(train, walk),
            bases: None,
            ties: Vec::new(),
        })
    }
}

#[test]
fn reduced_walks_equal_a_plain_first_order_pipeline() {
    let (edges, roles) = generate_synthetic(&SyntheticSpec {
        n_users: 30,
        n_developers: 30,
        events_per_snapshot: 300,
        seed: 9,
        ..SyntheticSpec::default()
    })
    .unwrap();
    let base = ExperimentConfig {
        walk: WalkConfig {
            walks_per_vertex: 3,
            walk_length: 15,
            ..WalkConfig::default()
        },
        train: TrainConfig {
            dim: 8,
            epochs: 1,
            deterministic: true,
            ..TrainConfig::default()
        },
        ..ExperimentConfig::default()
    };
    for protocol in [Protocol::Traditional, Protocol::TimePreserving] {
        let mut cfg = base.first_order();
        cfg.split.protocol = protocol;
        let seeds = [1, 2, 3];
        let reduced = run_experiment(&edges, &roles, &cfg, &seeds);
        let plain = run_experiment_with(&edges, &roles, &cfg, &seeds, &PlainFirstOrder);
        assert!(reduced.complete, "{:?}", reduced.seeds);
        assert_eq!(reduced.aucs(), plain.aucs());
        assert_eq!(reduced, plain);
    }
}
