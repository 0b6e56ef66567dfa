use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tssn_core::embed::{
    build_vocab, initial_params, pair_gradient, pair_loss, sgd_train, softmax_context_probability, TrainConfig,
};

fn vector(len: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1.5f64..1.5, len)
}

fn close(analytic: f64, numeric: f64) -> bool {
    (analytic - numeric).abs() <= 1e-4 * analytic.abs().max(numeric.abs()) + 1e-9
}

/// Central difference of `pair_loss` along coordinate `i` of the vector
/// picked by `which` (0 = center, 1 = context, 2.. = negatives).
fn numeric(center: &[f64], context: &[f64], negatives: &[Vec<f64>], which: usize, i: usize) -> f64 {
    let h = 1e-5;
    let mut vs: Vec<Vec<f64>> = vec![center.to_vec(), context.to_vec()];
    vs.extend(negatives.iter().cloned());
    let at = |delta: f64| {
        let mut vs = vs.clone();
        vs[which][i] += delta;
        let negs: Vec<&[f64]> = vs[2..].iter().map(|v| v.as_slice()).collect();
        pair_loss(&vs[0], &vs[1], &negs)
    };
    (at(h) - at(-h)) / (2.0 * h)
}

proptest! {
    #[test]
    fn gradients_match_central_differences(
        center in vector(4),
        context in vector(4),
        negatives in prop::collection::vec(vector(4), 1..4),
    ) {
        let negs: Vec<&[f64]> = negatives.iter().map(|v| v.as_slice()).collect();
        let g = pair_gradient(&center, &context, &negs);
        let mut analytic = vec![g.center, g.context];
        analytic.extend(g.negatives);
        for (which, grad) in analytic.iter().enumerate() {
            for (i, &a) in grad.iter().enumerate() {
                let n = numeric(&center, &context, &negatives, which, i);
                prop_assert!(close(a, n), "vector {} coord {}: {} vs {}", which, i, a, n);
            }
        }
    }
}

fn small_corpus(seed: u64) -> Vec<Vec<u32>> {
    // Five groups of ten tokens that co-occur only within their group.
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..400)
        .map(|i| {
            let group = (i % 5) as u32 * 10;
            (0..20).map(|_| group + rng.gen_range(0..10)).collect()
        })
        .collect()
}

#[test]
fn epoch_loss_does_not_increase() {
    let walks = small_corpus(1);
    let cfg = TrainConfig {
        dim: 8,
        window: 2,
        epochs: 6,
        initial_lr: 0.002,
        min_lr: 0.00001,
        ..TrainConfig::default()
    };
    let (_, report) = sgd_train(&walks, &cfg).unwrap();
    let rises = report.epoch_losses.windows(2).filter(|w| w[1] > w[0]).count();
    assert!(rises <= 1, "losses {:?}", report.epoch_losses);
    assert!(report.epoch_losses.last() < report.epoch_losses.first());
}

#[test]
fn training_raises_softmax_probability_of_observed_pairs() {
    let walks: Vec<Vec<u32>> = (0..40)
        .map(|i| {
            if i % 2 == 0 {
                vec![0, 1, 0, 1]
            } else {
                vec![2, 3, 4, 3, 2]
            }
        })
        .collect();
    let cfg = TrainConfig {
        dim: 4,
        window: 1,
        negatives: 2,
        epochs: 30,
        initial_lr: 0.05,
        ..TrainConfig::default()
    };
    let vocab = build_vocab(&walks).unwrap();
    assert!(vocab.len() <= 5);
    let init = initial_params(&vocab, &cfg);
    let (trained, _) = sgd_train(&walks, &cfg).unwrap();
    for (center, context) in [(0, 1), (1, 0), (2, 3), (3, 4), (4, 3)] {
        let before = softmax_context_probability(&init, center, context).unwrap();
        let after = softmax_context_probability(&trained, center, context).unwrap();
        assert!(after > before, "({center}, {context}): {before} -> {after}");
    }
}

#[test]
fn deterministic_mode_ignores_worker_count() {
    let walks = small_corpus(2);
    let base = TrainConfig {
        dim: 6,
        epochs: 2,
        deterministic: true,
        ..TrainConfig::default()
    };
    let (a, _) = sgd_train(
        &walks,
        &TrainConfig {
            threads: 1,
            ..base.clone()
        },
    )
    .unwrap();
    let (b, _) = sgd_train(
        &walks,
        &TrainConfig {
            threads: 4,
            ..base.clone()
        },
    )
    .unwrap();
    assert_eq!(a, b);
}
