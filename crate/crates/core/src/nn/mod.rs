//! Parameterised layers shared by the model modules.
//!
//! Layers only hold [`ParamId`]s; the values live in a [`ParamStore`] and
//! every forward pass records onto a [`Graph`] through a [`Ctx`].

mod attention;
mod lstm;
mod wavenet;

pub use attention::{sinusoidal_positions, FeedForward, MultiHeadAttention};
pub use lstm::{LstmCell, LstmState};
pub use wavenet::WaveNet;

use eegspeech_tensor::{Conv1dSpec, Graph, ParamId, ParamStore, Scalar, Tensor, Var};

use crate::rng::Rng;

/// Forward-pass context. With `frozen` set, parameters enter the graph as
/// constants, so no gradient closures are recorded for them.
pub struct Ctx<'a, T: Scalar> {
    pub g: &'a Graph<T>,
    pub ps: &'a ParamStore<T>,
    pub frozen: bool,
}

impl<'a, T: Scalar> Ctx<'a, T> {
    pub fn new(g: &'a Graph<T>, ps: &'a ParamStore<T>) -> Self {
        Self { g, ps, frozen: false }
    }

    pub fn frozen(g: &'a Graph<T>, ps: &'a ParamStore<T>) -> Self {
        Self { g, ps, frozen: true }
    }

    pub fn p(&self, id: ParamId) -> Var {
        if self.frozen {
            self.g.constant(self.ps.get(id).clone())
        } else {
            self.g.param(self.ps, id)
        }
    }

    pub fn lit(&self, v: f64) -> Var {
        self.g.scalar(T::lit(v))
    }
}

/// Registers named parameters under a dotted prefix.
pub struct Builder<'a, T: Scalar> {
    store: &'a mut ParamStore<T>,
    rng: &'a mut Rng,
    prefix: String,
}

impl<'a, T: Scalar> Builder<'a, T> {
    pub fn new(store: &'a mut ParamStore<T>, rng: &'a mut Rng, prefix: &str) -> Self {
        Self {
            store,
            rng,
            prefix: prefix.to_string(),
        }
    }

    pub fn sub(&mut self, name: &str) -> Builder<'_, T> {
        let prefix = if self.prefix.is_empty() {
            name.to_string()
        } else {
            format!("{}.{name}", self.prefix)
        };
        Builder {
            store: self.store,
            rng: self.rng,
            prefix,
        }
    }

    pub fn add(&mut self, name: &str, value: Tensor<T>) -> ParamId {
        let full = if self.prefix.is_empty() {
            name.to_string()
        } else {
            format!("{}.{name}", self.prefix)
        };
        self.store.add(full, value)
    }

    pub fn randn(&mut self, name: &str, shape: &[usize], std: f64) -> ParamId {
        let t = Tensor::randn(shape, std, self.rng);
        self.add(name, t)
    }

    pub fn uniform(&mut self, name: &str, shape: &[usize], lo: f64, hi: f64) -> ParamId {
        let t = Tensor::rand_uniform(shape, lo, hi, self.rng);
        self.add(name, t)
    }

    pub fn zeros(&mut self, name: &str, shape: &[usize]) -> ParamId {
        self.add(name, Tensor::zeros(shape))
    }

    pub fn ones(&mut self, name: &str, shape: &[usize]) -> ParamId {
        self.add(name, Tensor::ones(shape))
    }

    pub fn rng(&mut self) -> &mut Rng {
        self.rng
    }
}

/// `y = x W + b` over the last axis; leading axes are flattened.
#[derive(Clone, Debug)]
pub struct Linear {
    pub w: ParamId,
    pub b: Option<ParamId>,
    pub d_in: usize,
    pub d_out: usize,
}

impl Linear {
    pub fn new<T: Scalar>(b: &mut Builder<T>, d_in: usize, d_out: usize, bias: bool) -> Self {
        let std = 1.0 / (d_in as f64).sqrt();
        Self {
            w: b.randn("w", &[d_in, d_out], std),
            b: bias.then(|| b.zeros("b", &[d_out])),
            d_in,
            d_out,
        }
    }

    /// Zero-initialised weights and bias.
    pub fn zeroed<T: Scalar>(b: &mut Builder<T>, d_in: usize, d_out: usize) -> Self {
        Self {
            w: b.zeros("w", &[d_in, d_out]),
            b: Some(b.zeros("b", &[d_out])),
            d_in,
            d_out,
        }
    }

    pub fn forward<T: Scalar>(&self, c: &Ctx<T>, x: Var) -> Var {
        let shape = c.g.shape(x);
        let flat = if shape.len() == 2 {
            x
        } else {
            c.g.reshape(x, &[shape[..shape.len() - 1].iter().product(), self.d_in])
        };
        let mut y = c.g.matmul(flat, c.p(self.w));
        if let Some(b) = self.b {
            y = c.g.add(y, c.p(b));
        }
        if shape.len() == 2 {
            y
        } else {
            let mut out = shape;
            *out.last_mut().unwrap() = self.d_out;
            c.g.reshape(y, &out)
        }
    }
}

/// 1-D convolution layer over `[B, C, T]`.
#[derive(Clone, Debug)]
pub struct Conv1d {
    pub w: ParamId,
    pub b: Option<ParamId>,
    pub spec: Conv1dSpec,
    pub c_in: usize,
    pub c_out: usize,
    pub kernel: usize,
}

impl Conv1d {
    pub fn new<T: Scalar>(
        b: &mut Builder<T>,
        c_in: usize,
        c_out: usize,
        kernel: usize,
        spec: Conv1dSpec,
    ) -> Self {
        let fan_in = c_in / spec.groups * kernel;
        Self::with_std(b, c_in, c_out, kernel, spec, 1.0 / (fan_in as f64).sqrt())
    }

    pub fn with_std<T: Scalar>(
        b: &mut Builder<T>,
        c_in: usize,
        c_out: usize,
        kernel: usize,
        spec: Conv1dSpec,
        std: f64,
    ) -> Self {
        Self {
            w: b.randn("w", &[c_out, c_in / spec.groups, kernel], std),
            b: Some(b.zeros("b", &[c_out])),
            spec,
            c_in,
            c_out,
            kernel,
        }
    }

    pub fn zeroed<T: Scalar>(b: &mut Builder<T>, c_in: usize, c_out: usize, kernel: usize, spec: Conv1dSpec) -> Self {
        Self {
            w: b.zeros("w", &[c_out, c_in / spec.groups, kernel]),
            b: Some(b.zeros("b", &[c_out])),
            spec,
            c_in,
            c_out,
            kernel,
        }
    }

    pub fn forward<T: Scalar>(&self, c: &Ctx<T>, x: Var) -> Var {
        c.g.conv1d(x, c.p(self.w), self.b.map(|b| c.p(b)), self.spec)
    }

    pub fn out_len(&self, t_in: usize) -> usize {
        self.spec.out_len(t_in, self.kernel)
    }
}

/// Transposed 1-D convolution layer.
#[derive(Clone, Debug)]
pub struct ConvTranspose1d {
    pub w: ParamId,
    pub b: ParamId,
    pub stride: usize,
    pub pad_left: usize,
    pub pad_right: usize,
}

impl ConvTranspose1d {
    pub fn new<T: Scalar>(
        b: &mut Builder<T>,
        c_in: usize,
        c_out: usize,
        kernel: usize,
        stride: usize,
        pad: (usize, usize),
    ) -> Self {
        let std = 1.0 / ((c_in * kernel) as f64 / stride as f64).sqrt();
        Self {
            w: b.randn("w", &[c_in, c_out, kernel], std),
            b: b.zeros("b", &[c_out]),
            stride,
            pad_left: pad.0,
            pad_right: pad.1,
        }
    }

    pub fn forward<T: Scalar>(&self, c: &Ctx<T>, x: Var) -> Var {
        c.g.conv_transpose1d(x, c.p(self.w), Some(c.p(self.b)), self.stride, self.pad_left, self.pad_right)
    }
}

/// Layer normalisation over the last axis.
#[derive(Clone, Debug)]
pub struct LayerNorm {
    pub gamma: ParamId,
    pub beta: ParamId,
}

pub const LN_EPS: f64 = 1e-5;

impl LayerNorm {
    pub fn new<T: Scalar>(b: &mut Builder<T>, d: usize) -> Self {
        Self {
            gamma: b.ones("gamma", &[d]),
            beta: b.zeros("beta", &[d]),
        }
    }

    pub fn forward<T: Scalar>(&self, c: &Ctx<T>, x: Var) -> Var {
        c.g.layer_norm(x, c.p(self.gamma), c.p(self.beta), LN_EPS)
    }

    /// Normalises the channel axis of `[B, C, T]`.
    pub fn forward_channels<T: Scalar>(&self, c: &Ctx<T>, x: Var) -> Var {
        let xt = c.g.transpose(x);
        let y = self.forward(c, xt);
        c.g.transpose(y)
    }
}

/// Lookup table `[vocab, dim]`.
#[derive(Clone, Debug)]
pub struct Embedding {
    pub table: ParamId,
    pub vocab: usize,
}

impl Embedding {
    pub fn new<T: Scalar>(b: &mut Builder<T>, vocab: usize, dim: usize) -> Self {
        Self {
            table: b.randn("table", &[vocab, dim], 1.0 / (dim as f64).sqrt()),
            vocab,
        }
    }

    pub fn forward<T: Scalar>(&self, c: &Ctx<T>, ids: &[usize]) -> Var {
        c.g.index_select(c.p(self.table), ids)
    }
}

/// `[B, C, T] -> [B, C, T]` with channels in reverse order.
pub fn flip_channels<T: Scalar>(g: &Graph<T>, x: Var) -> Var {
    let shape = g.shape(x);
    let (b, ch, t) = (shape[0], shape[1], shape[2]);
    let mut idx = Vec::with_capacity(b * ch * t);
    for bi in 0..b {
        for ci in 0..ch {
            let src = (bi * ch + (ch - 1 - ci)) * t;
            idx.extend(src..src + t);
        }
    }
    g.gather_flat(x, &idx, &shape)
}

/// Reflection padding of the last axis (edge sample not repeated).
pub fn reflect_pad<T: Scalar>(g: &Graph<T>, x: Var, left: usize, right: usize) -> Var {
    let shape = g.shape(x);
    let t = *shape.last().unwrap();
    let outer: usize = shape[..shape.len() - 1].iter().product();
    let nt = t + left + right;
    let mut idx = Vec::with_capacity(outer * nt);
    for o in 0..outer {
        for j in 0..nt {
            let src = crate::frontend::stft::reflect_index(j as isize - left as isize, t);
            idx.push(o * t + src);
        }
    }
    let mut out_shape = shape;
    *out_shape.last_mut().unwrap() = nt;
    g.gather_flat(x, &idx, &out_shape)
}

/// Matrix `[t_in x t_out]` realising linear interpolation from `t_in` to
/// `t_out` positions: output `j` reads source position `j * t_in / t_out`.
pub fn interpolation_matrix(t_in: usize, t_out: usize) -> Vec<f64> {
    let mut m = vec![0.0; t_in * t_out];
    for j in 0..t_out {
        let src = j as f64 * t_in as f64 / t_out as f64;
        let i0 = (src.floor() as usize).min(t_in - 1);
        let i1 = (i0 + 1).min(t_in - 1);
        let w = (src - i0 as f64).clamp(0.0, 1.0);
        m[i0 * t_out + j] += 1.0 - w;
        m[i1 * t_out + j] += w;
    }
    m
}

/// Linear time interpolation of `[B, C, t_in]` to `[B, C, t_out]`.
pub fn interpolate_time<T: Scalar>(g: &Graph<T>, x: Var, t_out: usize) -> Var {
    let shape = g.shape(x);
    let (b, ch, t_in) = (shape[0], shape[1], shape[2]);
    if t_in == t_out {
        return x;
    }
    let m = g.constant(Tensor::from_f64(&[t_in, t_out], &interpolation_matrix(t_in, t_out)));
    let flat = g.reshape(x, &[b * ch, t_in]);
    let y = g.matmul(flat, m);
    g.reshape(y, &[b, ch, t_out])
}
