use crate::tensor::gemm_into;
use crate::{Graph, Scalar, Tensor, Var};

/// Geometry of a 1-D convolution over `[batch, channels, time]`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Conv1dSpec {
    pub stride: usize,
    pub dilation: usize,
    pub pad_left: usize,
    pub pad_right: usize,
    pub groups: usize,
}

impl Default for Conv1dSpec {
    fn default() -> Self {
        Self {
            stride: 1,
            dilation: 1,
            pad_left: 0,
            pad_right: 0,
            groups: 1,
        }
    }
}

impl Conv1dSpec {
    /// Stride-1 "same" padding for an odd kernel.
    pub fn same(kernel: usize, dilation: usize) -> Self {
        let p = dilation * (kernel - 1) / 2;
        Self {
            dilation,
            pad_left: p,
            pad_right: dilation * (kernel - 1) - p,
            ..Self::default()
        }
    }

    pub fn groups(mut self, groups: usize) -> Self {
        self.groups = groups;
        self
    }

    pub fn out_len(&self, t_in: usize, kernel: usize) -> usize {
        let span = self.dilation * (kernel - 1) + 1;
        let padded = t_in + self.pad_left + self.pad_right;
        assert!(
            padded >= span,
            "conv input too short: {t_in} samples (+pad) for kernel span {span}"
        );
        (padded - span) / self.stride + 1
    }
}

/// `col[(c*K + k), t] = x[c, t*s + k*d - pad]`, zero outside `[0, t_in)`.
#[allow(clippy::too_many_arguments)]
fn im2col<T: Scalar>(
    x: &[T],
    channels: usize,
    t_in: usize,
    kernel: usize,
    stride: usize,
    dilation: usize,
    pad: usize,
    cols: usize,
) -> Vec<T> {
    let mut col = vec![T::zero(); channels * kernel * cols];
    for c in 0..channels {
        let xr = &x[c * t_in..(c + 1) * t_in];
        for k in 0..kernel {
            let row = &mut col[(c * kernel + k) * cols..(c * kernel + k + 1) * cols];
            let shift = (k * dilation) as isize - pad as isize;
            if stride == 1 {
                let lo = (-shift).max(0) as usize;
                let hi = ((t_in as isize - shift).max(0) as usize).min(cols);
                if lo < hi {
                    let s0 = (lo as isize + shift) as usize;
                    row[lo..hi].copy_from_slice(&xr[s0..s0 + (hi - lo)]);
                }
            } else {
                for (t, r) in row.iter_mut().enumerate() {
                    let src = (t * stride) as isize + shift;
                    if src >= 0 && (src as usize) < t_in {
                        *r = xr[src as usize];
                    }
                }
            }
        }
    }
    col
}

/// Adjoint of [`im2col`]: scatter-adds columns into `x`.
#[allow(clippy::too_many_arguments)]
fn col2im<T: Scalar>(
    col: &[T],
    x: &mut [T],
    channels: usize,
    t_in: usize,
    kernel: usize,
    stride: usize,
    dilation: usize,
    pad: usize,
    cols: usize,
) {
    for c in 0..channels {
        let xr = &mut x[c * t_in..(c + 1) * t_in];
        for k in 0..kernel {
            let row = &col[(c * kernel + k) * cols..(c * kernel + k + 1) * cols];
            let shift = (k * dilation) as isize - pad as isize;
            for (t, &v) in row.iter().enumerate() {
                let dst = (t * stride) as isize + shift;
                if dst >= 0 && (dst as usize) < t_in {
                    xr[dst as usize] += v;
                }
            }
        }
    }
}

fn bias_grad<T: Scalar>(g: &Tensor<T>) -> Tensor<T> {
    let (b, c, t) = (g.dim(0), g.dim(1), g.dim(2));
    let mut out = vec![T::zero(); c];
    for bi in 0..b {
        for (ci, o) in out.iter_mut().enumerate() {
            *o += g.data()[(bi * c + ci) * t..(bi * c + ci + 1) * t]
                .iter()
                .copied()
                .sum::<T>();
        }
    }
    Tensor::new(&[c], out)
}

fn add_bias<T: Scalar>(out: &mut [T], bias: &[T], t: usize) {
    let c = bias.len();
    for (i, chunk) in out.chunks_mut(t).enumerate() {
        let b = bias[i % c];
        for v in chunk {
            *v += b;
        }
    }
}

impl<T: Scalar> Graph<T> {
    /// Grouped, strided, dilated 1-D convolution.
    ///
    /// `x: [B, C_in, T]`, `w: [C_out, C_in / groups, K]`, `bias: [C_out]`.
    pub fn conv1d(&self, x: Var, w: Var, bias: Option<Var>, spec: Conv1dSpec) -> Var {
        let xv = self.value(x);
        let wv = self.value(w);
        assert_eq!(xv.rank(), 3, "conv1d input must be [B, C, T]");
        let (b, cin, t_in) = (xv.dim(0), xv.dim(1), xv.dim(2));
        let (cout, cin_g, kernel) = (wv.dim(0), wv.dim(1), wv.dim(2));
        let groups = spec.groups;
        assert_eq!(cin_g * groups, cin, "conv1d channel mismatch");
        assert_eq!(cout % groups, 0, "conv1d output channels not divisible by groups");
        let cout_g = cout / groups;
        let t_out = spec.out_len(t_in, kernel);
        let rows = cin_g * kernel;
        let direct = kernel == 1 && spec.stride == 1 && spec.pad_left == 0 && t_out == t_in;
        let mut out = vec![T::zero(); b * cout * t_out];
        for bi in 0..b {
            for gi in 0..groups {
                let xs = &xv.data()[(bi * cin + gi * cin_g) * t_in..(bi * cin + (gi + 1) * cin_g) * t_in];
                let col_owned;
                let col: &[T] = if direct {
                    xs
                } else {
                    col_owned = im2col(xs, cin_g, t_in, kernel, spec.stride, spec.dilation, spec.pad_left, t_out);
                    &col_owned
                };
                let wg = &wv.data()[gi * cout_g * rows..(gi + 1) * cout_g * rows];
                let o = &mut out[(bi * cout + gi * cout_g) * t_out..(bi * cout + (gi + 1) * cout_g) * t_out];
                gemm_into(cout_g, rows, t_out, T::one(), wg, (rows as isize, 1), col, (t_out as isize, 1), T::zero(), o);
            }
        }
        let mut parents = vec![x, w];
        if let Some(bv) = bias {
            let bvv = self.value(bv);
            assert_eq!(bvv.numel(), cout, "conv1d bias size");
            add_bias(&mut out, bvv.data(), t_out);
            parents.push(bv);
        }
        let need_x = self.needs_grad(x);
        let need_w = self.needs_grad(w);
        let has_bias = bias.is_some();
        self.custom(&parents, Tensor::new(&[b, cout, t_out], out), move |g| {
            let mut dx = need_x.then(|| vec![T::zero(); b * cin * t_in]);
            let mut dw = need_w.then(|| vec![T::zero(); wv.numel()]);
            for bi in 0..b {
                for gi in 0..groups {
                    let xs = &xv.data()[(bi * cin + gi * cin_g) * t_in..(bi * cin + (gi + 1) * cin_g) * t_in];
                    let gs = &g.data()[(bi * cout + gi * cout_g) * t_out..(bi * cout + (gi + 1) * cout_g) * t_out];
                    let wg = &wv.data()[gi * cout_g * rows..(gi + 1) * cout_g * rows];
                    if let Some(dw) = dw.as_mut() {
                        let col_owned;
                        let col: &[T] = if direct {
                            xs
                        } else {
                            col_owned = im2col(xs, cin_g, t_in, kernel, spec.stride, spec.dilation, spec.pad_left, t_out);
                            &col_owned
                        };
                        let dwg = &mut dw[gi * cout_g * rows..(gi + 1) * cout_g * rows];
                        gemm_into(cout_g, t_out, rows, T::one(), gs, (t_out as isize, 1), col, (1, t_out as isize), T::one(), dwg);
                    }
                    if let Some(dx) = dx.as_mut() {
                        let dxs = &mut dx[(bi * cin + gi * cin_g) * t_in..(bi * cin + (gi + 1) * cin_g) * t_in];
                        if direct {
                            gemm_into(rows, cout_g, t_out, T::one(), wg, (1, rows as isize), gs, (t_out as isize, 1), T::one(), dxs);
                        } else {
                            let mut dcol = vec![T::zero(); rows * t_out];
                            gemm_into(rows, cout_g, t_out, T::one(), wg, (1, rows as isize), gs, (t_out as isize, 1), T::zero(), &mut dcol);
                            col2im(&dcol, dxs, cin_g, t_in, kernel, spec.stride, spec.dilation, spec.pad_left, t_out);
                        }
                    }
                }
            }
            let mut res = vec![
                dx.map(|d| Tensor::new(&[b, cin, t_in], d)),
                dw.map(|d| Tensor::new(wv.shape(), d)),
            ];
            if has_bias {
                res.push(Some(bias_grad(g)));
            }
            res
        })
    }

    /// Transposed 1-D convolution (groups = 1).
    ///
    /// `x: [B, C_in, T]`, `w: [C_in, C_out, K]`. Output length is
    /// `(T - 1) * stride + K - pad_left - pad_right`.
    pub fn conv_transpose1d(
        &self,
        x: Var,
        w: Var,
        bias: Option<Var>,
        stride: usize,
        pad_left: usize,
        pad_right: usize,
    ) -> Var {
        let xv = self.value(x);
        let wv = self.value(w);
        assert_eq!(xv.rank(), 3, "conv_transpose1d input must be [B, C, T]");
        let (b, cin, t_in) = (xv.dim(0), xv.dim(1), xv.dim(2));
        assert_eq!(wv.dim(0), cin, "conv_transpose1d channel mismatch");
        let (cout, kernel) = (wv.dim(1), wv.dim(2));
        let full = (t_in - 1) * stride + kernel;
        assert!(full > pad_left + pad_right, "conv_transpose1d padding exceeds output");
        let t_out = full - pad_left - pad_right;
        let rows = cout * kernel;
        let mut out = vec![T::zero(); b * cout * t_out];
        for bi in 0..b {
            let xs = &xv.data()[bi * cin * t_in..(bi + 1) * cin * t_in];
            let mut col = vec![T::zero(); rows * t_in];
            gemm_into(rows, cin, t_in, T::one(), wv.data(), (1, rows as isize), xs, (t_in as isize, 1), T::zero(), &mut col);
            let o = &mut out[bi * cout * t_out..(bi + 1) * cout * t_out];
            col2im(&col, o, cout, t_out, kernel, stride, 1, pad_left, t_in);
        }
        let mut parents = vec![x, w];
        if let Some(bv) = bias {
            let bvv = self.value(bv);
            assert_eq!(bvv.numel(), cout, "conv_transpose1d bias size");
            add_bias(&mut out, bvv.data(), t_out);
            parents.push(bv);
        }
        let need_x = self.needs_grad(x);
        let need_w = self.needs_grad(w);
        let has_bias = bias.is_some();
        self.custom(&parents, Tensor::new(&[b, cout, t_out], out), move |g| {
            let mut dx = need_x.then(|| vec![T::zero(); b * cin * t_in]);
            let mut dw = need_w.then(|| vec![T::zero(); wv.numel()]);
            for bi in 0..b {
                let gs = &g.data()[bi * cout * t_out..(bi + 1) * cout * t_out];
                let dcol = im2col(gs, cout, t_out, kernel, stride, 1, pad_left, t_in);
                if let Some(dx) = dx.as_mut() {
                    let dxs = &mut dx[bi * cin * t_in..(bi + 1) * cin * t_in];
                    gemm_into(cin, rows, t_in, T::one(), wv.data(), (rows as isize, 1), &dcol, (t_in as isize, 1), T::zero(), dxs);
                }
                if let Some(dw) = dw.as_mut() {
                    let xs = &xv.data()[bi * cin * t_in..(bi + 1) * cin * t_in];
                    gemm_into(cin, t_in, rows, T::one(), xs, (t_in as isize, 1), &dcol, (1, t_in as isize), T::one(), dw);
                }
            }
            let mut res = vec![
                dx.map(|d| Tensor::new(&[b, cin, t_in], d)),
                dw.map(|d| Tensor::new(wv.shape(), d)),
            ];
            if has_bias {
                res.push(Some(bias_grad(g)));
            }
            res
        })
    }
}
