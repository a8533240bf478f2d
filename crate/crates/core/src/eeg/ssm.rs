//! Diagonal state-space layer with zero-order-hold discretisation.
//!
//! Per channel `d` and state `n`: `lambda = -exp(a) + i b`, `dt = exp(log_dt)`,
//! `z = exp(dt lambda)`, `q = (z - 1) / lambda`. The layer computes
//! `y = K * u + D u` with kernel `K_l = Re sum_n C q z^l`.

use eegspeech_tensor::{Scalar, Tensor, Var};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::nn::{Builder, Ctx};
use eegspeech_tensor::ParamId;

type C64 = Complex64;

#[derive(Clone, Debug)]
pub struct SsmLayer {
    pub a: ParamId,
    pub b: ParamId,
    pub c_re: ParamId,
    pub c_im: ParamId,
    pub log_dt: ParamId,
    pub d: ParamId,
    pub dim: usize,
    pub state: usize,
}

/// Plain `f64` copy of the layer parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct SsmParams {
    pub dim: usize,
    pub state: usize,
    /// `[dim, state]`
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub c_re: Vec<f64>,
    pub c_im: Vec<f64>,
    /// `[dim]`
    pub log_dt: Vec<f64>,
    pub d: Vec<f64>,
}

/// Discretised per-mode quantities.
struct Modes {
    lambda: Vec<C64>,
    z: Vec<C64>,
    q: Vec<C64>,
    c: Vec<C64>,
    dt: Vec<f64>,
}

impl SsmParams {
    /// Random draw in the usual diagonal initialisation family.
    pub fn random<R: rand::Rng>(dim: usize, state: usize, rng: &mut R) -> Self {
        use rand_distr::{Distribution, StandardNormal};
        let mut n01 = || -> f64 { StandardNormal.sample(rng) };
        let mut p = Self {
            dim,
            state,
            a: vec![0.5f64.ln(); dim * state],
            b: (0..dim * state)
                .map(|i| std::f64::consts::PI * (i % state) as f64)
                .collect(),
            c_re: vec![0.0; dim * state],
            c_im: vec![0.0; dim * state],
            log_dt: vec![0.0; dim],
            d: vec![0.0; dim],
        };
        for i in 0..dim * state {
            p.c_re[i] = n01() * 0.5f64.sqrt();
            p.c_im[i] = n01() * 0.5f64.sqrt();
        }
        for i in 0..dim {
            p.d[i] = n01();
        }
        let (lo, hi) = (0.001f64.ln(), 0.1f64.ln());
        for v in p.log_dt.iter_mut() {
            *v = lo + (hi - lo) * rng.gen::<f64>();
        }
        p
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.dim * self.state;
        if [&self.a, &self.b, &self.c_re, &self.c_im].iter().any(|v| v.len() != n)
            || self.log_dt.len() != self.dim
            || self.d.len() != self.dim
        {
            return Err(Error::Init("state-space parameter shapes disagree".into()));
        }
        for (i, &a) in self.a.iter().enumerate() {
            let re = -a.exp();
            if !(re < 0.0) || !re.is_finite() {
                return Err(Error::Init(format!(
                    "state-space mode {i} is not stable: Re(lambda) = {re}"
                )));
            }
        }
        if self.log_dt.iter().any(|v| !v.exp().is_finite() || v.exp() <= 0.0) {
            return Err(Error::Init("state-space step size must be positive and finite".into()));
        }
        Ok(())
    }

    fn modes(&self) -> Modes {
        let n = self.dim * self.state;
        let mut m = Modes {
            lambda: Vec::with_capacity(n),
            z: Vec::with_capacity(n),
            q: Vec::with_capacity(n),
            c: Vec::with_capacity(n),
            dt: self.log_dt.iter().map(|v| v.exp()).collect(),
        };
        for i in 0..n {
            let lam = C64::new(-self.a[i].exp(), self.b[i]);
            let z = (lam * m.dt[i / self.state]).exp();
            m.lambda.push(lam);
            m.z.push(z);
            m.q.push((z - 1.0) / lam);
            m.c.push(C64::new(self.c_re[i], self.c_im[i]));
        }
        m
    }

    /// Convolution kernel `[dim, len]`.
    pub fn kernel(&self, len: usize) -> Vec<f64> {
        let m = self.modes();
        let mut k = vec![0.0; self.dim * len];
        for d in 0..self.dim {
            for s in 0..self.state {
                let i = d * self.state + s;
                let mut w = m.c[i] * m.q[i];
                for l in 0..len {
                    k[d * len + l] += w.re;
                    w *= m.z[i];
                }
            }
        }
        k
    }

    /// Convolution mode on `u: [dim, len]`.
    pub fn apply_conv(&self, u: &[f64], len: usize) -> Vec<f64> {
        let k = self.kernel(len);
        let mut y = vec![0.0; self.dim * len];
        for d in 0..self.dim {
            causal_conv_row(&k[d * len..(d + 1) * len], &u[d * len..(d + 1) * len], &mut y[d * len..(d + 1) * len]);
            for t in 0..len {
                y[d * len + t] += self.d[d] * u[d * len + t];
            }
        }
        y
    }

    /// Recurrence mode on `u: [dim, len]` from a zero state.
    pub fn apply_recurrence(&self, u: &[f64], len: usize) -> Vec<f64> {
        let m = self.modes();
        let mut y = vec![0.0; self.dim * len];
        for d in 0..self.dim {
            let mut h = vec![C64::new(0.0, 0.0); self.state];
            for t in 0..len {
                let x = u[d * len + t];
                let mut acc = 0.0;
                for (s, hs) in h.iter_mut().enumerate() {
                    let i = d * self.state + s;
                    *hs = m.z[i] * *hs + m.q[i] * x;
                    acc += (m.c[i] * *hs).re;
                }
                y[d * len + t] = acc + self.d[d] * x;
            }
        }
        y
    }
}

fn causal_conv_row(k: &[f64], u: &[f64], y: &mut [f64]) {
    let len = u.len();
    for t in 0..len {
        let mut acc = 0.0;
        for s in 0..=t {
            acc += k[t - s] * u[s];
        }
        y[t] += acc;
    }
}

impl SsmLayer {
    pub fn new<T: Scalar>(b: &mut Builder<T>, dim: usize, state: usize) -> Result<Self> {
        let p = SsmParams::random(dim, state, b.rng());
        p.validate()?;
        let ds = [dim, state];
        let t = |v: &[f64], shape: &[usize]| Tensor::<T>::from_f64(shape, v);
        Ok(Self {
            a: b.add("a", t(&p.a, &ds)),
            b: b.add("b", t(&p.b, &ds)),
            c_re: b.add("c_re", t(&p.c_re, &ds)),
            c_im: b.add("c_im", t(&p.c_im, &ds)),
            log_dt: b.add("log_dt", t(&p.log_dt, &[dim])),
            d: b.add("d", t(&p.d, &[dim])),
            dim,
            state,
        })
    }

    pub fn params<T: Scalar>(&self, ps: &eegspeech_tensor::ParamStore<T>) -> SsmParams {
        let v = |id: ParamId| ps.get(id).to_f64_vec();
        SsmParams {
            dim: self.dim,
            state: self.state,
            a: v(self.a),
            b: v(self.b),
            c_re: v(self.c_re),
            c_im: v(self.c_im),
            log_dt: v(self.log_dt),
            d: v(self.d),
        }
    }

    /// Convolution-mode forward on `[B, dim, T]`.
    pub fn forward<T: Scalar>(&self, c: &Ctx<T>, u: Var) -> Var {
        let ids = [self.a, self.b, self.c_re, self.c_im, self.log_dt, self.d];
        let vars: Vec<Var> = ids.iter().map(|&id| c.p(id)).collect();
        ssm_op(c.g, u, &vars, self.dim, self.state)
    }
}

/// Records the layer on the tape. `p = [a, b, c_re, c_im, log_dt, d]`.
pub fn ssm_op<T: Scalar>(g: &eegspeech_tensor::Graph<T>, u: Var, p: &[Var], dim: usize, state: usize) -> Var {
    let shape = g.shape(u);
    assert_eq!(shape.len(), 3, "state-space input must be [B, D, T]");
    assert_eq!(shape[1], dim, "state-space channel mismatch");
    let (batch, len) = (shape[0], shape[2]);
    let get = |v: Var| g.value(v).to_f64_vec();
    let params = SsmParams {
        dim,
        state,
        a: get(p[0]),
        b: get(p[1]),
        c_re: get(p[2]),
        c_im: get(p[3]),
        log_dt: get(p[4]),
        d: get(p[5]),
    };
    let uv = get(u);
    let k = params.kernel(len);
    let mut y = vec![0.0; uv.len()];
    for bi in 0..batch {
        let off = bi * dim * len;
        for d in 0..dim {
            let row = off + d * len;
            causal_conv_row(&k[d * len..(d + 1) * len], &uv[row..row + len], &mut y[row..row + len]);
            for t in 0..len {
                y[row + t] += params.d[d] * uv[row + t];
            }
        }
    }
    let value = Tensor::from_f64(&shape, &y);
    let mut parents = vec![u];
    parents.extend_from_slice(p);
    g.custom(&parents, value, move |grad| {
        let gy = grad.to_f64_vec();
        let back = ssm_backward(&params, &uv, &gy, &k, batch, len);
        let to = |v: &[f64], s: &[usize]| Some(Tensor::<T>::from_f64(s, v));
        let ds = [dim, state];
        vec![
            to(&back.du, &[batch, dim, len]),
            to(&back.da, &ds),
            to(&back.db, &ds),
            to(&back.dc_re, &ds),
            to(&back.dc_im, &ds),
            to(&back.dlog_dt, &[dim]),
            to(&back.dd, &[dim]),
        ]
    })
}

struct SsmGrads {
    du: Vec<f64>,
    da: Vec<f64>,
    db: Vec<f64>,
    dc_re: Vec<f64>,
    dc_im: Vec<f64>,
    dlog_dt: Vec<f64>,
    dd: Vec<f64>,
}

fn ssm_backward(p: &SsmParams, u: &[f64], gy: &[f64], k: &[f64], batch: usize, len: usize) -> SsmGrads {
    let (dim, state) = (p.dim, p.state);
    let mut gk = vec![0.0; dim * len];
    let mut du = vec![0.0; u.len()];
    let mut dd = vec![0.0; dim];
    for bi in 0..batch {
        for d in 0..dim {
            let row = bi * dim * len + d * len;
            let (ur, gr) = (&u[row..row + len], &gy[row..row + len]);
            let kr = &k[d * len..(d + 1) * len];
            for t in 0..len {
                let gt = gr[t];
                if gt == 0.0 {
                    continue;
                }
                for s in 0..=t {
                    gk[d * len + t - s] += gt * ur[s];
                    du[row + s] += gt * kr[t - s];
                }
                dd[d] += gt * ur[t];
                du[row + t] += p.d[d] * gt;
            }
        }
    }
    let m = p.modes();
    let n = dim * state;
    let mut out = SsmGrads {
        du,
        da: vec![0.0; n],
        db: vec![0.0; n],
        dc_re: vec![0.0; n],
        dc_im: vec![0.0; n],
        dlog_dt: vec![0.0; dim],
        dd,
    };
    for d in 0..dim {
        let dt = m.dt[d];
        let gkr = &gk[d * len..(d + 1) * len];
        for s in 0..state {
            let i = d * state + s;
            let (z, q, lam, c) = (m.z[i], m.q[i], m.lambda[i], m.c[i]);
            let cb = c * q;
            // S_cb = sum gK_l z^l, S_z = cb sum gK_l l z^(l-1)
            let mut s_cb = C64::new(0.0, 0.0);
            let mut s_zl = C64::new(0.0, 0.0);
            let mut zl = C64::new(1.0, 0.0);
            let mut zl1 = C64::new(0.0, 0.0);
            for (l, &g) in gkr.iter().enumerate() {
                s_cb += zl * g;
                s_zl += zl1 * (g * l as f64);
                zl1 = zl;
                zl *= z;
            }
            let s_z = cb * s_zl;
            let s_c = s_cb * q;
            let s_q = s_cb * c;
            let s_z_tot = s_z + s_q / lam;
            let s_lam = s_q * (-(z - 1.0) / (lam * lam)) + s_z_tot * z * dt;
            out.dc_re[i] = s_c.re;
            out.dc_im[i] = -s_c.im;
            out.da[i] = (s_lam * (-p.a[i].exp())).re;
            out.db[i] = -s_lam.im;
            out.dlog_dt[d] += (s_z_tot * lam * z).re * dt;
        }
    }
    out
}
