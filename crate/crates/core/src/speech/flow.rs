use eegspeech_tensor::{Conv1dSpec, Scalar, Var};

use crate::error::{config, contract, Result};
use crate::nn::{flip_channels, Builder, Conv1d, Ctx, WaveNet};

/// Affine coupling: the second half is scaled and shifted by statistics
/// computed from the first half and the conditioning features.
#[derive(Clone, Debug)]
pub struct Coupling {
    pre: Conv1d,
    net: WaveNet,
    post: Conv1d,
    half: usize,
}

impl Coupling {
    fn new<T: Scalar>(b: &mut Builder<T>, channels: usize, hidden: usize, kernel: usize, layers: usize, cond: usize) -> Self {
        let half = channels / 2;
        Self {
            pre: Conv1d::new(&mut b.sub("pre"), half, hidden, 1, Conv1dSpec::default()),
            net: WaveNet::new(&mut b.sub("wn"), hidden, kernel, 1, layers, cond),
            post: Conv1d::zeroed(&mut b.sub("post"), hidden, 2 * half, 1, Conv1dSpec::default()),
            half,
        }
    }

    /// Returns `(m, logs)` for the given first half.
    fn stats<T: Scalar>(&self, c: &Ctx<T>, x0: Var, cond: Option<Var>) -> (Var, Var) {
        let g = c.g;
        let h = self.pre.forward(c, x0);
        let h = self.net.forward(c, h, cond);
        let s = self.post.forward(c, h);
        (g.slice(s, 1, 0, self.half), g.slice(s, 1, self.half, 2 * self.half))
    }
}

/// Stack of couplings with channel flips in between.
#[derive(Clone, Debug)]
pub struct Flow {
    layers: Vec<Coupling>,
    pub channels: usize,
}

impl Flow {
    pub fn new<T: Scalar>(
        b: &mut Builder<T>,
        channels: usize,
        hidden: usize,
        kernel: usize,
        wn_layers: usize,
        n_couplings: usize,
        cond: usize,
    ) -> Result<Self> {
        if !channels.is_multiple_of(2) || channels == 0 {
            return Err(config(format!("flow width must be even, got {channels}")));
        }
        let layers = (0..n_couplings)
            .map(|i| Coupling::new(&mut b.sub(&format!("c{i}")), channels, hidden, kernel, wn_layers, cond))
            .collect();
        Ok(Self { layers, channels })
    }

    fn check<T: Scalar>(&self, c: &Ctx<T>, z: Var) -> Result<()> {
        let s = c.g.shape(z);
        if s.len() != 3 || s[1] != self.channels {
            return Err(contract(format!("flow input {s:?} does not have {} channels", self.channels)));
        }
        Ok(())
    }

    /// `z -> (z_p, sum of log-scales)`.
    pub fn forward<T: Scalar>(&self, c: &Ctx<T>, z: Var, cond: Option<Var>) -> Result<(Var, Var)> {
        self.check(c, z)?;
        let g = c.g;
        let mut x = z;
        let mut logdet = c.lit(0.0);
        for l in &self.layers {
            let x0 = g.slice(x, 1, 0, l.half);
            let x1 = g.slice(x, 1, l.half, 2 * l.half);
            let (m, logs) = l.stats(c, x0, cond);
            let y1 = g.add(m, g.mul(x1, g.exp(logs)));
            logdet = g.add(logdet, g.sum_all(logs));
            x = flip_channels(g, g.concat(&[x0, y1], 1));
        }
        Ok((x, logdet))
    }

    /// Exact inverse of [`Flow::forward`]; also returns the accumulated
    /// log-determinant of the inverse map.
    pub fn inverse<T: Scalar>(&self, c: &Ctx<T>, z_p: Var, cond: Option<Var>) -> Result<(Var, Var)> {
        self.check(c, z_p)?;
        let g = c.g;
        let mut x = z_p;
        let mut logdet = c.lit(0.0);
        for l in self.layers.iter().rev() {
            x = flip_channels(g, x);
            let x0 = g.slice(x, 1, 0, l.half);
            let y1 = g.slice(x, 1, l.half, 2 * l.half);
            let (m, logs) = l.stats(c, x0, cond);
            let x1 = g.mul(g.sub(y1, m), g.exp(g.neg(logs)));
            logdet = g.sub(logdet, g.sum_all(logs));
            x = g.concat(&[x0, x1], 1);
        }
        Ok((x, logdet))
    }
}
