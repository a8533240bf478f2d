use eegspeech_tensor::{Scalar, Tensor, Var};

use super::{Builder, Ctx, Linear};

/// Sinusoidal absolute positions `[t, d]`.
pub fn sinusoidal_positions<T: Scalar>(t: usize, d: usize) -> Tensor<T> {
    Tensor::from_fn(&[t, d], |i| {
        let (pos, j) = (i / d, i % d);
        let rate = 1.0 / 10000f64.powf((2 * (j / 2)) as f64 / d as f64);
        let a = pos as f64 * rate;
        T::lit(if j % 2 == 0 { a.sin() } else { a.cos() })
    })
}

/// Multi-head scaled dot-product self-attention over `[t, d]`.
#[derive(Clone, Debug)]
pub struct MultiHeadAttention {
    pub qkv: Linear,
    pub out: Linear,
    pub heads: usize,
    pub d: usize,
}

impl MultiHeadAttention {
    pub fn new<T: Scalar>(b: &mut Builder<T>, d: usize, heads: usize) -> Self {
        assert_eq!(d % heads, 0, "width must divide into heads");
        Self {
            qkv: Linear::new(&mut b.sub("qkv"), d, 3 * d, true),
            out: Linear::new(&mut b.sub("out"), d, d, true),
            heads,
            d,
        }
    }

    pub fn forward<T: Scalar>(&self, c: &Ctx<T>, x: Var) -> Var {
        let g = c.g;
        let t = g.shape(x)[0];
        let (h, dk) = (self.heads, self.d / self.heads);
        let qkv = self.qkv.forward(c, x);
        let split = |k: usize| {
            let part = g.slice(qkv, 1, k * self.d, (k + 1) * self.d);
            let r = g.reshape(part, &[t, h, dk]);
            g.permute(r, &[1, 0, 2])
        };
        let (q, k, v) = (split(0), split(1), split(2));
        let scores = g.scale(g.matmul_nt(q, k), T::lit(1.0 / (dk as f64).sqrt()));
        let att = g.softmax(scores);
        let ctx = g.matmul(att, v);
        let merged = g.reshape(g.permute(ctx, &[1, 0, 2]), &[t, self.d]);
        self.out.forward(c, merged)
    }
}

/// Position-wise feed-forward with SiLU.
#[derive(Clone, Debug)]
pub struct FeedForward {
    pub l1: Linear,
    pub l2: Linear,
}

impl FeedForward {
    pub fn new<T: Scalar>(b: &mut Builder<T>, d: usize, hidden: usize) -> Self {
        Self {
            l1: Linear::new(&mut b.sub("l1"), d, hidden, true),
            l2: Linear::new(&mut b.sub("l2"), hidden, d, true),
        }
    }

    pub fn forward<T: Scalar>(&self, c: &Ctx<T>, x: Var) -> Var {
        let h = c.g.silu(self.l1.forward(c, x));
        self.l2.forward(c, h)
    }
}
