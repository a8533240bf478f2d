use crate::{Graph, Scalar, Tensor, Var};

fn rows<T: Scalar>(t: &Tensor<T>) -> (usize, usize) {
    let d = *t.shape().last().expect("rank >= 1");
    (t.numel() / d.max(1), d)
}

pub fn softmax_rows<T: Scalar>(x: &Tensor<T>) -> Tensor<T> {
    let (n, d) = rows(x);
    let mut out = x.data().to_vec();
    for r in 0..n {
        let row = &mut out[r * d..(r + 1) * d];
        let m = row.iter().fold(T::neg_infinity(), |a, &b| a.max(b));
        let mut s = T::zero();
        for v in row.iter_mut() {
            *v = (*v - m).exp();
            s += *v;
        }
        for v in row.iter_mut() {
            *v /= s;
        }
    }
    Tensor::new(x.shape(), out)
}

pub fn log_softmax_rows<T: Scalar>(x: &Tensor<T>) -> Tensor<T> {
    let (n, d) = rows(x);
    let mut out = x.data().to_vec();
    for r in 0..n {
        let row = &mut out[r * d..(r + 1) * d];
        let m = row.iter().fold(T::neg_infinity(), |a, &b| a.max(b));
        let lse = m + row.iter().map(|&v| (v - m).exp()).sum::<T>().ln();
        for v in row.iter_mut() {
            *v -= lse;
        }
    }
    Tensor::new(x.shape(), out)
}

impl<T: Scalar> Graph<T> {
    /// Softmax over the last axis.
    pub fn softmax(&self, a: Var) -> Var {
        let y = softmax_rows(&self.value(a));
        let yc = y.clone();
        self.custom(&[a], y, move |g| {
            let (n, d) = rows(&yc);
            let mut out = vec![T::zero(); n * d];
            for r in 0..n {
                let yr = &yc.data()[r * d..(r + 1) * d];
                let gr = &g.data()[r * d..(r + 1) * d];
                let dot: T = yr.iter().zip(gr).map(|(&y, &g)| y * g).sum();
                for j in 0..d {
                    out[r * d + j] = yr[j] * (gr[j] - dot);
                }
            }
            vec![Some(Tensor::new(yc.shape(), out))]
        })
    }

    /// Log-softmax over the last axis.
    pub fn log_softmax(&self, a: Var) -> Var {
        let y = log_softmax_rows(&self.value(a));
        let yc = y.clone();
        self.custom(&[a], y, move |g| {
            let (n, d) = rows(&yc);
            let mut out = vec![T::zero(); n * d];
            for r in 0..n {
                let yr = &yc.data()[r * d..(r + 1) * d];
                let gr = &g.data()[r * d..(r + 1) * d];
                let gs: T = gr.iter().copied().sum();
                for j in 0..d {
                    out[r * d + j] = gr[j] - yr[j].exp() * gs;
                }
            }
            vec![Some(Tensor::new(yc.shape(), out))]
        })
    }

    /// Layer normalisation over the last axis with affine `gamma`, `beta` of
    /// shape `[d]`.
    pub fn layer_norm(&self, a: Var, gamma: Var, beta: Var, eps: f64) -> Var {
        let x = self.value(a);
        let gv = self.value(gamma);
        let bv = self.value(beta);
        let (n, d) = rows(&x);
        assert_eq!(gv.numel(), d, "layer_norm gamma size");
        assert_eq!(bv.numel(), d, "layer_norm beta size");
        let eps = T::lit(eps);
        let dn = T::lit(d as f64);
        let mut xhat = vec![T::zero(); n * d];
        let mut inv_std = vec![T::zero(); n];
        let mut out = vec![T::zero(); n * d];
        for r in 0..n {
            let row = &x.data()[r * d..(r + 1) * d];
            let mean = row.iter().copied().sum::<T>() / dn;
            let var = row.iter().map(|&v| (v - mean) * (v - mean)).sum::<T>() / dn;
            let is = (var + eps).sqrt().recip();
            inv_std[r] = is;
            for j in 0..d {
                let h = (row[j] - mean) * is;
                xhat[r * d + j] = h;
                out[r * d + j] = h * gv.data()[j] + bv.data()[j];
            }
        }
        let shape = x.shape().to_vec();
        self.custom(&[a, gamma, beta], Tensor::new(&shape, out), move |g| {
            let mut dx = vec![T::zero(); n * d];
            let mut dg = vec![T::zero(); d];
            let mut db = vec![T::zero(); d];
            for r in 0..n {
                let gr = &g.data()[r * d..(r + 1) * d];
                let hr = &xhat[r * d..(r + 1) * d];
                let mut m1 = T::zero();
                let mut m2 = T::zero();
                for j in 0..d {
                    let dh = gr[j] * gv.data()[j];
                    m1 += dh;
                    m2 += dh * hr[j];
                    dg[j] += gr[j] * hr[j];
                    db[j] += gr[j];
                }
                m1 /= dn;
                m2 /= dn;
                for j in 0..d {
                    let dh = gr[j] * gv.data()[j];
                    dx[r * d + j] = inv_std[r] * (dh - m1 - hr[j] * m2);
                }
            }
            vec![
                Some(Tensor::new(&shape, dx)),
                Some(Tensor::new(gv.shape(), dg)),
                Some(Tensor::new(bv.shape(), db)),
            ]
        })
    }
}
