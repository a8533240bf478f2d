use eegspeech_tensor::{Conv1dSpec, Scalar, Var};

use super::{Builder, Conv1d, Ctx};

/// Non-causal gated residual stack over `[B, H, T]` with optional
/// frame-level conditioning `[B, C_cond, T]`. Returns the sum of skips.
#[derive(Clone, Debug)]
pub struct WaveNet {
    pub in_layers: Vec<Conv1d>,
    pub res_skip: Vec<Conv1d>,
    pub cond: Option<Conv1d>,
    pub hidden: usize,
}

impl WaveNet {
    pub fn new<T: Scalar>(
        b: &mut Builder<T>,
        hidden: usize,
        kernel: usize,
        dilation_rate: usize,
        layers: usize,
        cond_channels: usize,
    ) -> Self {
        let mut in_layers = Vec::with_capacity(layers);
        let mut res_skip = Vec::with_capacity(layers);
        for i in 0..layers {
            let d = dilation_rate.pow(i as u32);
            in_layers.push(Conv1d::new(&mut b.sub(&format!("in{i}")), hidden, 2 * hidden, kernel, Conv1dSpec::same(kernel, d)));
            let out = if i + 1 < layers { 2 * hidden } else { hidden };
            res_skip.push(Conv1d::new(&mut b.sub(&format!("rs{i}")), hidden, out, 1, Conv1dSpec::default()));
        }
        let cond = (cond_channels > 0).then(|| {
            Conv1d::new(&mut b.sub("cond"), cond_channels, 2 * hidden * layers, 1, Conv1dSpec::default())
        });
        Self {
            in_layers,
            res_skip,
            cond,
            hidden,
        }
    }

    pub fn forward<T: Scalar>(&self, c: &Ctx<T>, x: Var, cond: Option<Var>) -> Var {
        let g = c.g;
        let h = self.hidden;
        let n = self.in_layers.len();
        let cond_all = match (&self.cond, cond) {
            (Some(layer), Some(v)) => Some(layer.forward(c, v)),
            _ => None,
        };
        let mut x = x;
        let mut skip: Option<Var> = None;
        for i in 0..n {
            let mut a = self.in_layers[i].forward(c, x);
            if let Some(ca) = cond_all {
                a = g.add(a, g.slice(ca, 1, 2 * h * i, 2 * h * (i + 1)));
            }
            let acts = g.mul(g.tanh(g.slice(a, 1, 0, h)), g.sigmoid(g.slice(a, 1, h, 2 * h)));
            let rs = self.res_skip[i].forward(c, acts);
            let s = if i + 1 < n {
                x = g.add(x, g.slice(rs, 1, 0, h));
                g.slice(rs, 1, h, 2 * h)
            } else {
                rs
            };
            skip = Some(match skip {
                Some(acc) => g.add(acc, s),
                None => s,
            });
        }
        skip.expect("at least one layer")
    }
}
