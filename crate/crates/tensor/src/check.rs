//! Central finite-difference gradient checks used by the test suites.

use crate::{Graph, Scalar, Tensor, Var};

/// Central-difference gradient of a scalar function of one tensor.
pub fn finite_diff<T: Scalar>(x: &Tensor<T>, step: f64, f: impl Fn(&Tensor<T>) -> f64) -> Vec<f64> {
    let mut grad = Vec::with_capacity(x.numel());
    let mut probe = x.clone();
    for i in 0..x.numel() {
        let orig = probe.data()[i];
        probe.data_mut()[i] = orig + T::lit(step);
        let up = f(&probe);
        probe.data_mut()[i] = orig - T::lit(step);
        let down = f(&probe);
        probe.data_mut()[i] = orig;
        grad.push((up - down) / (2.0 * step));
    }
    grad
}

/// Largest relative error between two gradient vectors, with an absolute
/// floor `atol` in the denominator so near-zero entries do not dominate.
pub fn max_rel_error(analytic: &[f64], numeric: &[f64], atol: f64) -> f64 {
    analytic
        .iter()
        .zip(numeric)
        .map(|(a, n)| (a - n).abs() / (a.abs().max(n.abs()) + atol))
        .fold(0.0, f64::max)
}

/// Compares the tape gradient of `build` (which maps an input leaf to a
/// scalar) against central differences. Returns the max relative error.
pub fn check_gradient(
    x: &Tensor<f64>,
    step: f64,
    atol: f64,
    build: impl Fn(&Graph<f64>, Var) -> Var,
) -> f64 {
    let g = Graph::new();
    let xv = g.input(x.clone());
    let y = build(&g, xv);
    let grads = g.backward(y);
    let analytic = grads
        .wrt(xv)
        .map(Tensor::to_f64_vec)
        .unwrap_or_else(|| vec![0.0; x.numel()]);
    let numeric = finite_diff(x, step, |p| {
        let g = Graph::new();
        let xv = g.constant(p.clone());
        let y = build(&g, xv);
        g.item(y)
    });
    max_rel_error(&analytic, &numeric, atol)
}
