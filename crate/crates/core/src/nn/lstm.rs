use eegspeech_tensor::{Scalar, Tensor, Var};

use super::{Builder, Ctx};

/// Single-layer LSTM cell on row vectors `[1, d]`.
#[derive(Clone, Debug)]
pub struct LstmCell {
    pub w_ih: eegspeech_tensor::ParamId,
    pub w_hh: eegspeech_tensor::ParamId,
    pub b: eegspeech_tensor::ParamId,
    pub d_in: usize,
    pub hidden: usize,
}

#[derive(Clone, Copy, Debug)]
pub struct LstmState {
    pub h: Var,
    pub c: Var,
}

impl LstmCell {
    pub fn new<T: Scalar>(b: &mut Builder<T>, d_in: usize, hidden: usize) -> Self {
        let k = 1.0 / (hidden as f64).sqrt();
        let w_ih = b.uniform("w_ih", &[d_in, 4 * hidden], -k, k);
        let w_hh = b.uniform("w_hh", &[hidden, 4 * hidden], -k, k);
        // forget-gate bias starts at 1
        let bias = Tensor::from_fn(&[4 * hidden], |i| {
            if (hidden..2 * hidden).contains(&i) {
                T::one()
            } else {
                T::zero()
            }
        });
        Self {
            w_ih,
            w_hh,
            b: b.add("b", bias),
            d_in,
            hidden,
        }
    }

    pub fn zero_state<T: Scalar>(&self, c: &Ctx<T>) -> LstmState {
        LstmState {
            h: c.g.constant(Tensor::zeros(&[1, self.hidden])),
            c: c.g.constant(Tensor::zeros(&[1, self.hidden])),
        }
    }

    pub fn step<T: Scalar>(&self, c: &Ctx<T>, x: Var, s: LstmState) -> LstmState {
        let g = c.g;
        let gates = g.add(
            g.add(g.matmul(x, c.p(self.w_ih)), g.matmul(s.h, c.p(self.w_hh))),
            c.p(self.b),
        );
        let h = self.hidden;
        let i = g.sigmoid(g.slice(gates, 1, 0, h));
        let f = g.sigmoid(g.slice(gates, 1, h, 2 * h));
        let cand = g.tanh(g.slice(gates, 1, 2 * h, 3 * h));
        let o = g.sigmoid(g.slice(gates, 1, 3 * h, 4 * h));
        let cell = g.add(g.mul(f, s.c), g.mul(i, cand));
        LstmState {
            h: g.mul(o, g.tanh(cell)),
            c: cell,
        }
    }
}
