mod common;

use common::{inf_norm, random_ssm};
use eegspeech_core::eeg::ssm::ssm_op;
use eegspeech_core::eeg::recon_loss;
use eegspeech_tensor::{Graph, Tensor};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn convolution_and_recurrence_agree() {
    let mut r = ChaCha8Rng::seed_from_u64(4);
    let t = 64;
    for _ in 0..20 {
        let p = random_ssm(&mut r, 3, 8);
        let u: Vec<f64> = (0..3 * t).map(|_| r.gen_range(-1.0..1.0)).collect();
        let err = inf_norm(&p.apply_conv(&u, t), &p.apply_recurrence(&u, t));
        assert!(err < 1e-10, "{err}");
    }
}

#[test]
fn graph_operator_matches_recurrence() {
    let mut r = ChaCha8Rng::seed_from_u64(5);
    let (dim, state, t) = (3, 4, 64);
    for _ in 0..20 {
        let p = random_ssm(&mut r, dim, state);
        let u: Vec<f64> = (0..dim * t).map(|_| r.gen_range(-1.0..1.0)).collect();
        let g = Graph::<f64>::new();
        let ds = [dim, state];
        let vars = [
            g.constant(Tensor::from_f64(&ds, &p.a)),
            g.constant(Tensor::from_f64(&ds, &p.b)),
            g.constant(Tensor::from_f64(&ds, &p.c_re)),
            g.constant(Tensor::from_f64(&ds, &p.c_im)),
            g.constant(Tensor::from_f64(&[dim], &p.log_dt)),
            g.constant(Tensor::from_f64(&[dim], &p.d)),
        ];
        let y = ssm_op(&g, g.constant(Tensor::from_f64(&[1, dim, t], &u)), &vars, dim, state);
        let err = inf_norm(&g.value(y).to_f64_vec(), &p.apply_recurrence(&u, t));
        assert!(err < 1e-4, "{err}");
    }
}

fn recon(x: &[f64], y: &[f64], ch: usize) -> (f64, usize) {
    let len = x.len() / ch;
    let g = Graph::<f64>::new();
    let l = recon_loss(
        &g,
        g.constant(Tensor::from_f64(&[1, ch, len], x)),
        g.constant(Tensor::from_f64(&[1, ch, len], y)),
    )
    .unwrap();
    (g.item(l.loss), l.zero_norm_channels)
}

#[test]
fn reconstruction_loss_trivial_cases() {
    let x = [1.0, 2.0, -1.0, 0.5, 3.0, -2.0];
    let neg: Vec<f64> = x.iter().map(|v| -v).collect();
    let scaled: Vec<f64> = x.iter().map(|v| 4.0 * v).collect();
    assert!(recon(&x, &x, 2).0.abs() < 1e-7);
    assert!(recon(&x, &scaled, 2).0.abs() < 1e-7);
    assert!((recon(&x, &neg, 2).0 - 2.0).abs() < 1e-7);
    // Orthogonal per channel.
    let a = [1.0, 0.0, 0.0, 1.0];
    let b = [0.0, 1.0, 1.0, 0.0];
    assert!((recon(&a, &b, 2).0 - 1.0).abs() < 1e-7);
}

#[test]
fn zero_channel_counts_as_zero_similarity() {
    let x = [1.0, 2.0, 0.0, 0.0];
    let (loss, zero) = recon(&x, &x, 2);
    assert_eq!(zero, 1);
    assert!((loss - 0.5).abs() < 1e-12);
}

proptest! {
    #[test]
    fn reconstruction_loss_is_bounded_and_scale_invariant(
        x in proptest::collection::vec(-5.0f64..5.0, 12),
        y in proptest::collection::vec(-5.0f64..5.0, 12),
        s in 0.1f64..10.0,
    ) {
        let (l, zero) = recon(&x, &y, 3);
        prop_assume!(zero == 0);
        prop_assert!((-1e-12..=2.0 + 1e-12).contains(&l));
        let ys: Vec<f64> = y.iter().map(|v| s * v).collect();
        prop_assert!((recon(&x, &ys, 3).0 - l).abs() < 1e-9);
    }

    #[test]
    fn state_space_layer_is_linear(seed in 0u64..500, alpha in -2.0f64..2.0) {
        let mut r = ChaCha8Rng::seed_from_u64(seed);
        let p = random_ssm(&mut r, 2, 4);
        let t = 16;
        let u: Vec<f64> = (0..2 * t).map(|_| r.gen_range(-1.0..1.0)).collect();
        let v: Vec<f64> = (0..2 * t).map(|_| r.gen_range(-1.0..1.0)).collect();
        let mix: Vec<f64> = u.iter().zip(&v).map(|(a, b)| alpha * a + b).collect();
        let (yu, yv, ym) = (p.apply_conv(&u, t), p.apply_conv(&v, t), p.apply_conv(&mix, t));
        let lin: Vec<f64> = yu.iter().zip(&yv).map(|(a, b)| alpha * a + b).collect();
        prop_assert!(inf_norm(&ym, &lin) < 1e-10);
    }
}
