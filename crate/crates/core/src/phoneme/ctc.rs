//! CTC loss over normalised log-probabilities `[T, V]` with blank at index 0.

use eegspeech_tensor::{Graph, Scalar, Tensor, Var};

pub const BLANK: usize = 0;

fn lse2(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let m = a.max(b);
    m + ((a - m).exp() + (b - m).exp()).ln()
}

fn lse3(a: f64, b: f64, c: f64) -> f64 {
    lse2(lse2(a, b), c)
}

/// Frames needed to emit `target`: one per label plus one blank between
/// each pair of equal neighbours.
pub fn min_frames(target: &[usize]) -> usize {
    target.len() + target.windows(2).filter(|w| w[0] == w[1]).count()
}

fn extended(target: &[usize]) -> Vec<usize> {
    let mut l = Vec::with_capacity(2 * target.len() + 1);
    l.push(BLANK);
    for &t in target {
        l.push(t);
        l.push(BLANK);
    }
    l
}

fn can_skip(l: &[usize], s: usize) -> bool {
    s >= 2 && l[s] != BLANK && l[s] != l[s - 2]
}

/// Log-space forward variables `alpha[t][s]` (emission at `t` included).
fn forward(lp: &[f64], t_len: usize, v: usize, l: &[usize]) -> Vec<f64> {
    let n = l.len();
    let mut a = vec![f64::NEG_INFINITY; t_len * n];
    a[0] = lp[l[0]];
    if n > 1 {
        a[1] = lp[l[1]];
    }
    for t in 1..t_len {
        for s in 0..n {
            let prev = &a[(t - 1) * n..t * n];
            let mut acc = lse2(prev[s], if s >= 1 { prev[s - 1] } else { f64::NEG_INFINITY });
            if can_skip(l, s) {
                acc = lse2(acc, prev[s - 2]);
            }
            a[t * n + s] = acc + lp[t * v + l[s]];
        }
    }
    a
}

/// Log-space backward variables `beta[t][s]` (emission at `t` excluded).
fn backward(lp: &[f64], t_len: usize, v: usize, l: &[usize]) -> Vec<f64> {
    let n = l.len();
    let mut b = vec![f64::NEG_INFINITY; t_len * n];
    b[(t_len - 1) * n + n - 1] = 0.0;
    if n > 1 {
        b[(t_len - 1) * n + n - 2] = 0.0;
    }
    for t in (0..t_len - 1).rev() {
        for s in 0..n {
            let nx = |s2: usize| b[(t + 1) * n + s2] + lp[(t + 1) * v + l[s2]];
            let stay = nx(s);
            let step = if s + 1 < n { nx(s + 1) } else { f64::NEG_INFINITY };
            let skip = if s + 2 < n && can_skip(l, s + 2) { nx(s + 2) } else { f64::NEG_INFINITY };
            b[t * n + s] = lse3(stay, step, skip);
        }
    }
    b
}

/// `-log P(target | log_probs)` and its gradient with respect to the
/// log-probabilities. Infeasible targets give `+inf` and a zero gradient.
pub fn ctc_value_and_grad(lp: &[f64], t_len: usize, v: usize, target: &[usize]) -> (f64, Vec<f64>) {
    let mut grad = vec![0.0; t_len * v];
    if t_len == 0 || min_frames(target) > t_len {
        return (f64::INFINITY, grad);
    }
    let l = extended(target);
    let n = l.len();
    let a = forward(lp, t_len, v, &l);
    let last = &a[(t_len - 1) * n..];
    let logp = lse2(last[n - 1], if n > 1 { last[n - 2] } else { f64::NEG_INFINITY });
    if logp == f64::NEG_INFINITY {
        return (f64::INFINITY, grad);
    }
    let b = backward(lp, t_len, v, &l);
    for t in 0..t_len {
        for s in 0..n {
            let w = a[t * n + s] + b[t * n + s] - logp;
            if w > f64::NEG_INFINITY {
                grad[t * v + l[s]] -= w.exp();
            }
        }
    }
    (-logp, grad)
}

pub struct CtcLoss {
    pub loss: Var,
    pub feasible: bool,
}

/// Records the CTC loss of `log_probs: [T, V]` against `target` (no blanks).
pub fn ctc_loss<T: Scalar>(g: &Graph<T>, log_probs: Var, target: &[usize]) -> CtcLoss {
    let shape = g.shape(log_probs);
    assert_eq!(shape.len(), 2, "CTC expects [T, V] log-probabilities");
    assert!(target.iter().all(|&t| t != BLANK && t < shape[1]), "CTC target contains blank or out-of-range id");
    let lp = g.value(log_probs).to_f64_vec();
    let (value, grad) = ctc_value_and_grad(&lp, shape[0], shape[1], target);
    let feasible = value.is_finite();
    let loss = g.custom(&[log_probs], Tensor::scalar(T::lit(value)), move |up| {
        let s = up.item().as_f64();
        let scaled: Vec<f64> = grad.iter().map(|v| v * s).collect();
        vec![Some(Tensor::from_f64(&shape, &scaled))]
    });
    CtcLoss { loss, feasible }
}

/// Per-frame argmax, repeats collapsed, blanks removed.
pub fn greedy_decode(lp: &[f64], t_len: usize, v: usize) -> Vec<usize> {
    let mut out = Vec::new();
    let mut prev = None;
    for t in 0..t_len {
        let row = &lp[t * v..(t + 1) * v];
        let mut best = 0;
        for k in 1..v {
            if row[k] > row[best] {
                best = k;
            }
        }
        if Some(best) != prev && best != BLANK {
            out.push(best);
        }
        prev = Some(best);
    }
    out
}
