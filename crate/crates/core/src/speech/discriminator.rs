use eegspeech_tensor::{Conv1dSpec, Graph, Scalar, Var};

use crate::error::{contract, Result};
use crate::nn::{reflect_pad, Builder, Conv1d, Ctx};

use super::generator::LRELU_SLOPE;

/// Shortest waveform the discriminators accept.
pub const MIN_SEGMENT: usize = 64;

#[derive(Clone, Debug)]
struct SubDisc {
    convs: Vec<Conv1d>,
    post: Conv1d,
    /// Column period; 0 for the raw-scale discriminator.
    period: usize,
}

impl SubDisc {
    fn period<T: Scalar>(b: &mut Builder<T>, p: usize) -> Self {
        let chans = [1, 16, 32, 64, 64];
        let strides = [3, 3, 3, 1];
        let convs = (0..4)
            .map(|i| {
                let spec = Conv1dSpec {
                    stride: strides[i],
                    pad_left: 2,
                    pad_right: 2,
                    ..Conv1dSpec::default()
                };
                Conv1d::new(&mut b.sub(&format!("c{i}")), chans[i], chans[i + 1], 5, spec)
            })
            .collect();
        Self {
            convs,
            post: Conv1d::new(&mut b.sub("post"), 64, 1, 3, Conv1dSpec::same(3, 1)),
            period: p,
        }
    }

    fn scale<T: Scalar>(b: &mut Builder<T>) -> Self {
        let layers: [(usize, usize, usize, usize, usize); 4] =
            [(1, 16, 15, 1, 1), (16, 32, 41, 4, 4), (32, 64, 41, 4, 16), (64, 64, 5, 1, 1)];
        let convs = layers
            .iter()
            .enumerate()
            .map(|(i, &(ci, co, k, s, gr))| {
                let spec = Conv1dSpec {
                    stride: s,
                    pad_left: (k - 1) / 2,
                    pad_right: (k - 1) / 2,
                    groups: gr,
                    ..Conv1dSpec::default()
                };
                Conv1d::new(&mut b.sub(&format!("c{i}")), ci, co, k, spec)
            })
            .collect();
        Self {
            convs,
            post: Conv1d::new(&mut b.sub("post"), 64, 1, 3, Conv1dSpec::same(3, 1)),
            period: 0,
        }
    }

    fn forward<T: Scalar>(&self, c: &Ctx<T>, w: Var) -> (Var, Vec<Var>) {
        let g = c.g;
        let mut x = if self.period > 0 { fold_period(g, w, self.period) } else { w };
        let mut feats = Vec::new();
        for conv in &self.convs {
            x = g.leaky_relu(conv.forward(c, x), T::lit(LRELU_SLOPE));
            feats.push(x);
        }
        let x = self.post.forward(c, x);
        feats.push(x);
        (x, feats)
    }
}

/// `[1, 1, L] -> [p, 1, ceil(L / p)]`: one row per phase, reflect-padded.
pub fn fold_period<T: Scalar>(g: &Graph<T>, w: Var, p: usize) -> Var {
    let len = g.shape(w)[2];
    let padded = len.div_ceil(p) * p;
    let x = if padded > len { reflect_pad(g, w, 0, padded - len) } else { w };
    let rows = padded / p;
    let idx: Vec<usize> = (0..p).flat_map(|ph| (0..rows).map(move |r| r * p + ph)).collect();
    g.gather_flat(x, &idx, &[p, 1, rows])
}

/// Output of every sub-discriminator for one waveform.
pub struct DiscOutput {
    pub logits: Vec<Var>,
    pub feats: Vec<Vec<Var>>,
}

/// Period discriminators plus one raw-scale discriminator.
#[derive(Clone, Debug)]
pub struct Discriminators {
    subs: Vec<SubDisc>,
}

impl Discriminators {
    pub fn new<T: Scalar>(b: &mut Builder<T>, periods: &[usize]) -> Self {
        let mut subs: Vec<SubDisc> = periods
            .iter()
            .map(|&p| SubDisc::period(&mut b.sub(&format!("p{p}")), p))
            .collect();
        subs.push(SubDisc::scale(&mut b.sub("s0")));
        Self { subs }
    }

    pub fn len(&self) -> usize {
        self.subs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.subs.is_empty()
    }

    pub fn forward<T: Scalar>(&self, c: &Ctx<T>, w: Var) -> Result<DiscOutput> {
        let s = c.g.shape(w);
        if s.len() != 3 || s[0] != 1 || s[1] != 1 {
            return Err(contract(format!("discriminator input must be [1, 1, L], got {s:?}")));
        }
        if s[2] < MIN_SEGMENT {
            return Err(contract(format!(
                "segment of {} samples is shorter than {MIN_SEGMENT}",
                s[2]
            )));
        }
        let mut logits = Vec::new();
        let mut feats = Vec::new();
        for sub in &self.subs {
            let (l, f) = sub.forward(c, w);
            logits.push(l);
            feats.push(f);
        }
        Ok(DiscOutput { logits, feats })
    }
}

/// `sum_k mean((1 - D(real))^2) + mean(D(fake)^2)`.
pub fn disc_loss<T: Scalar>(g: &Graph<T>, real: &DiscOutput, fake: &DiscOutput) -> Var {
    let mut total = g.scalar(T::zero());
    for (r, f) in real.logits.iter().zip(&fake.logits) {
        let lr = g.mean_all(g.square(g.add_scalar(g.neg(*r), T::one())));
        let lf = g.mean_all(g.square(*f));
        total = g.add(total, g.add(lr, lf));
    }
    total
}

/// `sum_k mean((1 - D(fake))^2)`.
pub fn gen_adv_loss<T: Scalar>(g: &Graph<T>, fake: &DiscOutput) -> Var {
    let mut total = g.scalar(T::zero());
    for f in &fake.logits {
        total = g.add(total, g.mean_all(g.square(g.add_scalar(g.neg(*f), T::one()))));
    }
    total
}

/// `sum over every feature map of mean |real - fake|`, unweighted.
pub fn feature_matching<T: Scalar>(g: &Graph<T>, real: &DiscOutput, fake: &DiscOutput) -> Var {
    let mut total = g.scalar(T::zero());
    for (rs, fs) in real.feats.iter().zip(&fake.feats) {
        for (r, f) in rs.iter().zip(fs) {
            let r = g.detach(*r);
            total = g.add(total, g.mean_all(g.abs(g.sub(r, *f))));
        }
    }
    total
}
