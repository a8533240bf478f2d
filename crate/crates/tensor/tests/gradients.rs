use eegspeech_tensor::check::check_gradient;
use eegspeech_tensor::{Conv1dSpec, Graph, Tensor, Var};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const STEP: f64 = 1e-5;
const TOL: f64 = 1e-6;

fn rng() -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(7)
}

fn weighted_sum(g: &Graph<f64>, y: Var, seed: u64) -> Var {
    // random projection so every output element contributes a distinct weight
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    let w = g.constant(Tensor::randn(&g.shape(y), 1.0, &mut r));
    g.sum_all(g.mul(y, w))
}

#[test]
fn elementwise_ops() {
    let mut r = rng();
    let x = Tensor::<f64>::rand_uniform(&[3, 4], 0.2, 2.0, &mut r);
    let b = Tensor::<f64>::randn(&[4], 1.0, &mut r);
    type Op = Box<dyn Fn(&Graph<f64>, Var) -> Var>;
    let ops: Vec<(&str, Op)> = vec![
        ("exp", Box::new(|g, x| g.exp(x))),
        ("log", Box::new(|g, x| g.log(x))),
        ("sqrt", Box::new(|g, x| g.sqrt(x))),
        ("tanh", Box::new(|g, x| g.tanh(x))),
        ("sigmoid", Box::new(|g, x| g.sigmoid(x))),
        ("silu", Box::new(|g, x| g.silu(x))),
        ("square", Box::new(|g, x| g.square(x))),
        ("leaky", Box::new(|g, x| g.leaky_relu(g.add_scalar(x, -1.0), 0.1))),
        ("softmax", Box::new(|g, x| g.softmax(x))),
        ("log_softmax", Box::new(|g, x| g.log_softmax(x))),
        ("glu", Box::new(|g, x| g.glu(x, 1))),
        ("bcast_add", Box::new(move |g, x| g.add(x, g.constant(b.clone())))),
        ("bcast_mul", {
            let b2 = Tensor::<f64>::rand_uniform(&[3, 1], 0.5, 1.5, &mut rng());
            Box::new(move |g, x| g.mul(x, g.constant(b2.clone())))
        }),
        ("div", Box::new(|g, x| g.div(g.scalar(1.0), x))),
        ("sum_axis", Box::new(|g, x| g.sum_axis(x, 0))),
        ("mean_axis", Box::new(|g, x| g.mean_axis(x, 1))),
        ("permute", Box::new(|g, x| g.transpose(x))),
        ("slice", Box::new(|g, x| g.slice(x, 1, 1, 3))),
        ("concat", Box::new(|g, x| g.concat(&[x, g.square(x)], 1))),
        ("index", Box::new(|g, x| g.index_select(x, &[2, 0, 2]))),
        ("gather", Box::new(|g, x| g.gather_flat(x, &[0, 5, 5, 11], &[2, 2]))),
        ("pad", Box::new(|g, x| g.pad_last(x, 2, 1))),
    ];
    for (i, (name, op)) in ops.iter().enumerate() {
        let err = check_gradient(&x, STEP, TOL, |g, x| weighted_sum(g, op(g, x), i as u64));
        assert!(err < 1e-6, "{name}: rel err {err}");
    }
}

#[test]
fn broadcast_operand_gradient() {
    let mut r = rng();
    let a = Tensor::<f64>::randn(&[2, 3, 4], 1.0, &mut r);
    let err = check_gradient(&Tensor::randn(&[3, 1], 1.0, &mut r), STEP, TOL, |g, b| {
        let a = g.constant(a.clone());
        weighted_sum(g, g.mul(a, b), 1)
    });
    assert!(err < 1e-6, "{err}");
}

#[test]
fn matmul_variants() {
    let mut r = rng();
    let a = Tensor::<f64>::randn(&[3, 5], 1.0, &mut r);
    let b = Tensor::<f64>::randn(&[5, 2], 1.0, &mut r);
    let bt = b.t();
    for which in 0..3 {
        let err = check_gradient(&a, STEP, TOL, |g, x| {
            let y = match which {
                0 => g.matmul(x, g.constant(b.clone())),
                1 => g.matmul_nt(x, g.constant(bt.clone())),
                _ => g.matmul_tn(g.transpose(x), g.constant(b.clone())),
            };
            weighted_sum(g, y, 3)
        });
        assert!(err < 1e-6, "variant {which}: {err}");
        let err = check_gradient(&b, STEP, TOL, |g, x| {
            let y = match which {
                0 => g.matmul(g.constant(a.clone()), x),
                1 => g.matmul_nt(g.constant(a.clone()), g.transpose(x)),
                _ => g.matmul_tn(g.constant(a.t()), x),
            };
            weighted_sum(g, y, 4)
        });
        assert!(err < 1e-6, "variant {which} rhs: {err}");
    }
    let a3 = Tensor::<f64>::randn(&[2, 3, 4], 1.0, &mut r);
    let b3 = Tensor::<f64>::randn(&[2, 3, 5], 1.0, &mut r);
    let err = check_gradient(&a3, STEP, TOL, |g, x| {
        weighted_sum(g, g.matmul_tn(x, g.constant(b3.clone())), 5)
    });
    assert!(err < 1e-6, "batched: {err}");
}

#[test]
fn layer_norm_gradients() {
    let mut r = rng();
    let x = Tensor::<f64>::randn(&[4, 6], 1.0, &mut r);
    let gamma = Tensor::<f64>::randn(&[6], 1.0, &mut r);
    let beta = Tensor::<f64>::randn(&[6], 1.0, &mut r);
    let err = check_gradient(&x, STEP, TOL, |g, x| {
        let y = g.layer_norm(x, g.constant(gamma.clone()), g.constant(beta.clone()), 1e-5);
        weighted_sum(g, y, 6)
    });
    assert!(err < 1e-5, "x: {err}");
    let err = check_gradient(&gamma, STEP, TOL, |g, gm| {
        let y = g.layer_norm(g.constant(x.clone()), gm, g.constant(beta.clone()), 1e-5);
        weighted_sum(g, y, 6)
    });
    assert!(err < 1e-6, "gamma: {err}");
}

#[test]
fn conv1d_gradients() {
    let mut r = rng();
    let specs = [
        (Conv1dSpec::default(), 4, 6, 3),
        (Conv1dSpec::same(5, 2), 4, 6, 5),
        (
            Conv1dSpec {
                stride: 3,
                pad_left: 2,
                pad_right: 1,
                ..Conv1dSpec::default()
            },
            4,
            6,
            4,
        ),
        (Conv1dSpec::same(3, 1).groups(2), 4, 6, 3),
        (Conv1dSpec::default(), 4, 6, 1),
    ];
    for (i, &(spec, cin, cout, k)) in specs.iter().enumerate() {
        let x = Tensor::<f64>::randn(&[2, cin, 11], 1.0, &mut r);
        let w = Tensor::<f64>::randn(&[cout, cin / spec.groups, k], 0.5, &mut r);
        let b = Tensor::<f64>::randn(&[cout], 0.5, &mut r);
        let err = check_gradient(&x, STEP, TOL, |g, x| {
            let y = g.conv1d(x, g.constant(w.clone()), Some(g.constant(b.clone())), spec);
            weighted_sum(g, y, 10 + i as u64)
        });
        assert!(err < 1e-6, "spec {i} input: {err}");
        let err = check_gradient(&w, STEP, TOL, |g, w| {
            let y = g.conv1d(g.constant(x.clone()), w, Some(g.constant(b.clone())), spec);
            weighted_sum(g, y, 10 + i as u64)
        });
        assert!(err < 1e-6, "spec {i} weight: {err}");
        let err = check_gradient(&b, STEP, TOL, |g, b| {
            let y = g.conv1d(g.constant(x.clone()), g.constant(w.clone()), Some(b), spec);
            weighted_sum(g, y, 10 + i as u64)
        });
        assert!(err < 1e-6, "spec {i} bias: {err}");
    }
}

#[test]
fn conv1d_matches_direct_sum() {
    let mut r = rng();
    let x = Tensor::<f64>::randn(&[1, 2, 9], 1.0, &mut r);
    let w = Tensor::<f64>::randn(&[3, 2, 3], 1.0, &mut r);
    let spec = Conv1dSpec {
        stride: 2,
        dilation: 2,
        pad_left: 1,
        pad_right: 2,
        groups: 1,
    };
    let g = Graph::new();
    let y = g.conv1d(g.constant(x.clone()), g.constant(w.clone()), None, spec);
    let yv = g.value(y);
    let t_out = spec.out_len(9, 3);
    assert_eq!(yv.shape(), &[1, 3, t_out]);
    for co in 0..3 {
        for t in 0..t_out {
            let mut s = 0.0;
            for ci in 0..2 {
                for k in 0..3 {
                    let src = (t * 2 + k * 2) as isize - 1;
                    if (0..9).contains(&src) {
                        s += w.at(&[co, ci, k]) * x.at(&[0, ci, src as usize]);
                    }
                }
            }
            assert!((yv.at(&[0, co, t]) - s).abs() < 1e-12);
        }
    }
}

#[test]
fn conv_transpose_is_adjoint_of_conv() {
    // <conv(x), y> == <x, conv_T(y)> with shared weights
    let mut r = rng();
    let (cin, cout, k, s, p) = (3, 2, 4, 2, 1);
    let x = Tensor::<f64>::randn(&[1, cin, 10], 1.0, &mut r);
    let w = Tensor::<f64>::randn(&[cout, cin, k], 1.0, &mut r);
    let spec = Conv1dSpec {
        stride: s,
        pad_left: p,
        pad_right: p,
        ..Conv1dSpec::default()
    };
    let g = Graph::new();
    let y = g.conv1d(g.constant(x.clone()), g.constant(w.clone()), None, spec);
    let yv = g.value(y);
    let probe = Tensor::<f64>::randn(yv.shape(), 1.0, &mut r);
    // transposed conv takes weights laid out [C_in', C_out', K] = [cout, cin, k]
    let back = g.conv_transpose1d(g.constant(probe.clone()), g.constant(w.clone()), None, s, p, p);
    let bv = g.value(back);
    let bv = if bv.dim(2) >= 10 { bv.slice_axis(2, 0, 10) } else { panic!("short") };
    let lhs: f64 = yv.data().iter().zip(probe.data()).map(|(a, b)| a * b).sum();
    let rhs: f64 = x.data().iter().zip(bv.data()).map(|(a, b)| a * b).sum();
    assert!((lhs - rhs).abs() < 1e-10, "{lhs} vs {rhs}");
}

#[test]
fn conv_transpose_gradients() {
    let mut r = rng();
    let x = Tensor::<f64>::randn(&[2, 3, 5], 1.0, &mut r);
    let w = Tensor::<f64>::randn(&[3, 2, 4], 0.5, &mut r);
    let b = Tensor::<f64>::randn(&[2], 0.5, &mut r);
    let err = check_gradient(&x, STEP, TOL, |g, x| {
        let y = g.conv_transpose1d(x, g.constant(w.clone()), Some(g.constant(b.clone())), 2, 1, 1);
        weighted_sum(g, y, 20)
    });
    assert!(err < 1e-6, "input: {err}");
    let err = check_gradient(&w, STEP, TOL, |g, w| {
        let y = g.conv_transpose1d(g.constant(x.clone()), w, Some(g.constant(b.clone())), 2, 1, 1);
        weighted_sum(g, y, 20)
    });
    assert!(err < 1e-6, "weight: {err}");
    let g = Graph::new();
    let y = g.conv_transpose1d(g.constant(x), g.constant(w), None, 2, 1, 1);
    assert_eq!(g.shape(y), vec![2, 2, (5 - 1) * 2 + 4 - 2]);
}

#[test]
fn detach_blocks_gradient_and_reuse_accumulates() {
    let g = Graph::<f64>::new();
    let x = g.input(Tensor::from_f64(&[2], &[1.0, 2.0]));
    let d = g.detach(x);
    let y = g.sum_all(g.add(g.mul(x, x), g.mul(d, x)));
    let grads = g.backward(y);
    // d/dx (x^2 + c x) = 2x + c with c = x held constant
    assert_eq!(grads.wrt(x).unwrap().to_f64_vec(), vec![3.0, 6.0]);
}
