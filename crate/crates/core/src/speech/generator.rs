use eegspeech_tensor::{Conv1dSpec, Scalar, Var};

use crate::nn::{Builder, Conv1d, ConvTranspose1d, Ctx};

pub const LRELU_SLOPE: f64 = 0.1;

/// Residual block with one dilated and one plain conv per dilation.
#[derive(Clone, Debug)]
struct ResBlock {
    convs1: Vec<Conv1d>,
    convs2: Vec<Conv1d>,
}

impl ResBlock {
    fn new<T: Scalar>(b: &mut Builder<T>, ch: usize, kernel: usize, dilations: &[usize]) -> Self {
        let mut convs1 = Vec::new();
        let mut convs2 = Vec::new();
        for (i, &d) in dilations.iter().enumerate() {
            convs1.push(Conv1d::new(&mut b.sub(&format!("a{i}")), ch, ch, kernel, Conv1dSpec::same(kernel, d)));
            convs2.push(Conv1d::new(&mut b.sub(&format!("b{i}")), ch, ch, kernel, Conv1dSpec::same(kernel, 1)));
        }
        Self { convs1, convs2 }
    }

    fn forward<T: Scalar>(&self, c: &Ctx<T>, x: Var) -> Var {
        let g = c.g;
        let slope = T::lit(LRELU_SLOPE);
        let mut x = x;
        for (c1, c2) in self.convs1.iter().zip(&self.convs2) {
            let h = c1.forward(c, g.leaky_relu(x, slope));
            let h = c2.forward(c, g.leaky_relu(h, slope));
            x = g.add(x, h);
        }
        x
    }
}

/// Transposed-conv upsampler with multi-receptive-field fusion.
#[derive(Clone, Debug)]
pub struct Generator {
    pre: Conv1d,
    ups: Vec<ConvTranspose1d>,
    blocks: Vec<Vec<ResBlock>>,
    post: Conv1d,
    pub hop: usize,
}

impl Generator {
    pub fn new<T: Scalar>(
        b: &mut Builder<T>,
        d_in: usize,
        initial: usize,
        rates: &[usize],
        kernels: &[usize],
        dilations: &[usize],
    ) -> Self {
        let pre = Conv1d::new(&mut b.sub("pre"), d_in, initial, 7, Conv1dSpec::same(7, 1));
        let mut ups = Vec::new();
        let mut blocks = Vec::new();
        let mut ch = initial;
        for (i, &u) in rates.iter().enumerate() {
            let out = (ch / 2).max(1);
            let pad = u / 2;
            ups.push(ConvTranspose1d::new(&mut b.sub(&format!("up{i}")), ch, out, 2 * u, u, (pad, 2 * u - u - pad)));
            blocks.push(
                kernels
                    .iter()
                    .enumerate()
                    .map(|(j, &k)| ResBlock::new(&mut b.sub(&format!("mrf{i}_{j}")), out, k, dilations))
                    .collect(),
            );
            ch = out;
        }
        let post = Conv1d::new(&mut b.sub("post"), ch, 1, 7, Conv1dSpec::same(7, 1));
        Self {
            pre,
            ups,
            blocks,
            post,
            hop: rates.iter().product(),
        }
    }

    /// `[1, d_in, T] -> [1, 1, hop * T]`, bounded by tanh.
    pub fn forward<T: Scalar>(&self, c: &Ctx<T>, z: Var) -> Var {
        let g = c.g;
        let mut x = self.pre.forward(c, z);
        for (up, mrf) in self.ups.iter().zip(&self.blocks) {
            x = up.forward(c, g.leaky_relu(x, T::lit(LRELU_SLOPE)));
            let mut acc: Option<Var> = None;
            for blk in mrf {
                let y = blk.forward(c, x);
                acc = Some(match acc {
                    Some(a) => g.add(a, y),
                    None => y,
                });
            }
            x = g.scale(acc.expect("at least one kernel"), T::lit(1.0 / mrf.len() as f64));
        }
        let x = self.post.forward(c, g.leaky_relu(x, T::lit(0.01)));
        g.tanh(x)
    }
}
