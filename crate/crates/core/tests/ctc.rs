mod common;

use common::{ctc_by_enumeration, log_softmax_rows};
use eegspeech_core::phoneme::ctc::{ctc_loss, ctc_value_and_grad, greedy_decode, min_frames};
use eegspeech_tensor::check::check_gradient;
use eegspeech_tensor::{Graph, Tensor};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_instance(r: &mut ChaCha8Rng) -> (usize, usize, Vec<f64>, Vec<usize>) {
    let t = r.gen_range(1..=6);
    let v = r.gen_range(2..=4);
    let len = r.gen_range(0..=3.min(t));
    let target: Vec<usize> = (0..len).map(|_| r.gen_range(1..v)).collect();
    let logits: Vec<f64> = (0..t * v).map(|_| r.gen_range(-2.0..2.0)).collect();
    (t, v, log_softmax_rows(&logits, v), target)
}

#[test]
fn loss_matches_path_enumeration() {
    let mut r = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..200 {
        let (t, v, lp, target) = random_instance(&mut r);
        let (loss, _) = ctc_value_and_grad(&lp, t, v, &target);
        let oracle = ctc_by_enumeration(&lp, t, v, &target);
        if oracle.is_infinite() {
            assert!(loss.is_infinite());
        } else {
            assert!((loss - oracle).abs() < 1e-9, "{loss} vs {oracle} for {target:?}");
        }
    }
}

#[test]
fn gradient_through_softmax_matches_finite_differences() {
    let mut r = ChaCha8Rng::seed_from_u64(2);
    let mut checked = 0;
    while checked < 20 {
        let (t, v, _, target) = random_instance(&mut r);
        if min_frames(&target) > t {
            continue;
        }
        let x = Tensor::<f64>::from_fn(&[t, v], |_| r.gen_range(-2.0..2.0));
        let err = check_gradient(&x, 1e-4, 1e-8, |g, x| ctc_loss(g, g.log_softmax(x), &target).loss);
        assert!(err < 1e-5, "relative error {err}");
        checked += 1;
    }
}

#[test]
fn infeasible_target_is_infinite_with_zero_gradient() {
    let lp = log_softmax_rows(&[0.0; 6], 3);
    let (loss, grad) = ctc_value_and_grad(&lp, 2, 3, &[1, 1]);
    assert!(loss.is_infinite());
    assert!(grad.iter().all(|&x| x == 0.0));
    let g = Graph::<f64>::new();
    let c = ctc_loss(&g, g.constant(Tensor::from_f64(&[2, 3], &lp)), &[1, 1]);
    assert!(!c.feasible);
}

#[test]
fn greedy_decoding_recovers_a_confident_path() {
    // Frames argmax: 1 1 0 2 2 0 1
    let best = [1, 1, 0, 2, 2, 0, 1];
    let mut lp = vec![-5.0; 7 * 3];
    for (t, &b) in best.iter().enumerate() {
        lp[t * 3 + b] = -0.01;
    }
    assert_eq!(greedy_decode(&lp, 7, 3), vec![1, 2, 1]);
}

proptest! {
    #[test]
    fn loss_is_non_negative_and_gradient_rows_sum_to_zero_mass(
        seed in 0u64..1000,
    ) {
        let mut r = ChaCha8Rng::seed_from_u64(seed);
        let (t, v, lp, target) = random_instance(&mut r);
        let (loss, grad) = ctc_value_and_grad(&lp, t, v, &target);
        prop_assume!(loss.is_finite());
        prop_assert!(loss >= -1e-12);
        // d loss / d log p sums to -1 per frame: each frame emits exactly one symbol.
        for row in grad.chunks(v) {
            prop_assert!((row.iter().sum::<f64>() + 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn min_frames_is_exactly_the_feasibility_threshold(
        target in proptest::collection::vec(1usize..3, 0..4),
    ) {
        let v = 3;
        let need = min_frames(&target);
        let lp = log_softmax_rows(&vec![0.0; 6 * v], v);
        for t in 1..=6 {
            let (loss, _) = ctc_value_and_grad(&lp[..t * v], t, v, &target);
            prop_assert_eq!(loss.is_finite(), t >= need);
        }
    }
}
