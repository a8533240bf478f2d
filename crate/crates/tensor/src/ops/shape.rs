use crate::tensor::strides_of;
use crate::{Graph, Scalar, Tensor, Var};

fn inverse_perm(perm: &[usize]) -> Vec<usize> {
    let mut inv = vec![0; perm.len()];
    for (i, &p) in perm.iter().enumerate() {
        inv[p] = i;
    }
    inv
}

impl<T: Scalar> Graph<T> {
    pub fn reshape(&self, a: Var, shape: &[usize]) -> Var {
        let av = self.value(a);
        let in_shape = av.shape().to_vec();
        let value = av.reshape(shape);
        self.custom(&[a], value, move |g| vec![Some(g.reshape(&in_shape))])
    }

    pub fn permute(&self, a: Var, perm: &[usize]) -> Var {
        let value = self.value(a).permute(perm);
        let inv = inverse_perm(perm);
        self.custom(&[a], value, move |g| vec![Some(g.permute(&inv))])
    }

    /// Swaps the last two axes.
    pub fn transpose(&self, a: Var) -> Var {
        let r = self.shape(a).len();
        assert!(r >= 2, "transpose needs rank >= 2");
        let mut perm: Vec<usize> = (0..r).collect();
        perm.swap(r - 2, r - 1);
        self.permute(a, &perm)
    }

    pub fn slice(&self, a: Var, axis: usize, start: usize, end: usize) -> Var {
        let av = self.value(a);
        let in_shape = av.shape().to_vec();
        let value = av.slice_axis(axis, start, end);
        self.custom(&[a], value, move |g| {
            let mut out = Tensor::zeros(&in_shape);
            let outer: usize = in_shape[..axis].iter().product();
            let inner: usize = in_shape[axis + 1..].iter().product();
            let d = in_shape[axis];
            let len = end - start;
            let src = g.data();
            let dst = out.data_mut();
            for o in 0..outer {
                let s = &src[o * len * inner..(o + 1) * len * inner];
                let base = o * d * inner + start * inner;
                dst[base..base + len * inner].copy_from_slice(s);
            }
            vec![Some(out)]
        })
    }

    pub fn concat(&self, parts: &[Var], axis: usize) -> Var {
        let values: Vec<_> = parts.iter().map(|&p| self.value(p)).collect();
        let refs: Vec<&Tensor<T>> = values.iter().map(|v| v.as_ref()).collect();
        let value = Tensor::concat(&refs, axis);
        let sizes: Vec<usize> = values.iter().map(|v| v.shape()[axis]).collect();
        self.custom(parts, value, move |g| {
            let mut off = 0;
            sizes
                .iter()
                .map(|&s| {
                    let part = g.slice_axis(axis, off, off + s);
                    off += s;
                    Some(part)
                })
                .collect()
        })
    }

    /// Stacks equally shaped values along a new leading axis.
    pub fn stack(&self, parts: &[Var]) -> Var {
        let shape = self.shape(parts[0]);
        let expanded: Vec<Var> = parts
            .iter()
            .map(|&p| {
                let mut s = vec![1];
                s.extend(&shape);
                self.reshape(p, &s)
            })
            .collect();
        self.concat(&expanded, 0)
    }

    /// Selects rows of the leading axis (embedding lookup).
    pub fn index_select(&self, a: Var, rows: &[usize]) -> Var {
        let av = self.value(a);
        let in_shape = av.shape().to_vec();
        let inner: usize = in_shape[1..].iter().product();
        let mut data = Vec::with_capacity(rows.len() * inner);
        for &r in rows {
            assert!(r < in_shape[0], "row {r} out of range {}", in_shape[0]);
            data.extend_from_slice(&av.data()[r * inner..(r + 1) * inner]);
        }
        let mut shape = in_shape.clone();
        shape[0] = rows.len();
        let rows = rows.to_vec();
        self.custom(&[a], Tensor::new(&shape, data), move |g| {
            let mut out = Tensor::zeros(&in_shape);
            let dst = out.data_mut();
            for (i, &r) in rows.iter().enumerate() {
                for j in 0..inner {
                    dst[r * inner + j] += g.data()[i * inner + j];
                }
            }
            vec![Some(out)]
        })
    }

    /// Flat gather: `out[i] = a.flat[idx[i]]`, reshaped to `shape`.
    /// The backward pass scatter-adds.
    pub fn gather_flat(&self, a: Var, idx: &[usize], shape: &[usize]) -> Var {
        let av = self.value(a);
        let n = av.numel();
        let data = idx.iter().map(|&i| av.data()[i]).collect();
        let idx = idx.to_vec();
        let in_shape = av.shape().to_vec();
        self.custom(&[a], Tensor::new(shape, data), move |g| {
            let mut out = vec![T::zero(); n];
            for (gv, &i) in g.data().iter().zip(&idx) {
                out[i] += *gv;
            }
            vec![Some(Tensor::new(&in_shape, out))]
        })
    }

    /// Zero padding of the last axis.
    pub fn pad_last(&self, a: Var, left: usize, right: usize) -> Var {
        let av = self.value(a);
        let shape = av.shape().to_vec();
        let t = *shape.last().expect("rank >= 1");
        let outer = av.numel() / t.max(1);
        let nt = t + left + right;
        let mut data = vec![T::zero(); outer * nt];
        for o in 0..outer {
            data[o * nt + left..o * nt + left + t]
                .copy_from_slice(&av.data()[o * t..(o + 1) * t]);
        }
        let mut out_shape = shape.clone();
        *out_shape.last_mut().unwrap() = nt;
        self.custom(&[a], Tensor::new(&out_shape, data), move |g| {
            let mut gd = Vec::with_capacity(outer * t);
            for o in 0..outer {
                gd.extend_from_slice(&g.data()[o * nt + left..o * nt + left + t]);
            }
            vec![Some(Tensor::new(&shape, gd))]
        })
    }

    pub fn sum_all(&self, a: Var) -> Var {
        let av = self.value(a);
        let shape = av.shape().to_vec();
        let value = Tensor::scalar(av.sum());
        self.custom(&[a], value, move |g| vec![Some(Tensor::full(&shape, g.item()))])
    }

    pub fn mean_all(&self, a: Var) -> Var {
        let n = self.value(a).numel();
        let s = self.sum_all(a);
        self.scale(s, T::one() / T::lit(n as f64))
    }

    /// Sum over `axis`, keeping it with size 1.
    pub fn sum_axis(&self, a: Var, axis: usize) -> Var {
        let av = self.value(a);
        let shape = av.shape().to_vec();
        let outer: usize = shape[..axis].iter().product();
        let inner: usize = shape[axis + 1..].iter().product();
        let d = shape[axis];
        let mut out = vec![T::zero(); outer * inner];
        for o in 0..outer {
            for k in 0..d {
                let src = &av.data()[(o * d + k) * inner..(o * d + k + 1) * inner];
                for (dst, &v) in out[o * inner..(o + 1) * inner].iter_mut().zip(src) {
                    *dst += v;
                }
            }
        }
        let mut out_shape = shape.clone();
        out_shape[axis] = 1;
        self.custom(&[a], Tensor::new(&out_shape, out), move |g| {
            vec![Some(g.broadcast_to(&shape))]
        })
    }

    pub fn mean_axis(&self, a: Var, axis: usize) -> Var {
        let d = self.shape(a)[axis];
        let s = self.sum_axis(a, axis);
        self.scale(s, T::one() / T::lit(d as f64))
    }

    /// Row-major strides of a recorded value.
    pub fn strides(&self, a: Var) -> Vec<usize> {
        strides_of(&self.shape(a))
    }
}
