use std::fmt;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::Scalar;

/// Dense row-major n-dimensional array.
#[derive(Clone, PartialEq)]
pub struct Tensor<T> {
    shape: Vec<usize>,
    data: Vec<T>,
}

impl<T: fmt::Debug> fmt::Debug for Tensor<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let head: Vec<&T> = self.data.iter().take(8).collect();
        f.debug_struct("Tensor")
            .field("shape", &self.shape)
            .field("head", &head)
            .finish()
    }
}

pub(crate) fn numel(shape: &[usize]) -> usize {
    shape.iter().product()
}

pub(crate) fn strides_of(shape: &[usize]) -> Vec<usize> {
    let mut strides = vec![0; shape.len()];
    let mut acc = 1;
    for (s, &d) in strides.iter_mut().zip(shape).rev() {
        *s = acc;
        acc *= d;
    }
    strides
}

impl<T: Scalar> Tensor<T> {
    pub fn new(shape: &[usize], data: Vec<T>) -> Self {
        assert_eq!(
            numel(shape),
            data.len(),
            "shape {shape:?} does not match {} elements",
            data.len()
        );
        Self {
            shape: shape.to_vec(),
            data,
        }
    }

    pub fn zeros(shape: &[usize]) -> Self {
        Self::full(shape, T::zero())
    }

    pub fn ones(shape: &[usize]) -> Self {
        Self::full(shape, T::one())
    }

    pub fn full(shape: &[usize], v: T) -> Self {
        Self {
            shape: shape.to_vec(),
            data: vec![v; numel(shape)],
        }
    }

    pub fn scalar(v: T) -> Self {
        Self {
            shape: vec![],
            data: vec![v],
        }
    }

    pub fn from_fn(shape: &[usize], mut f: impl FnMut(usize) -> T) -> Self {
        let n = numel(shape);
        Self {
            shape: shape.to_vec(),
            data: (0..n).map(&mut f).collect(),
        }
    }

    pub fn from_f64(shape: &[usize], data: &[f64]) -> Self {
        Self::new(shape, data.iter().map(|&v| T::lit(v)).collect())
    }

    pub fn randn<R: Rng + ?Sized>(shape: &[usize], std: f64, rng: &mut R) -> Self {
        Self::from_fn(shape, |_| {
            let z: f64 = StandardNormal.sample(rng);
            T::lit(z * std)
        })
    }

    pub fn rand_uniform<R: Rng + ?Sized>(shape: &[usize], lo: f64, hi: f64, rng: &mut R) -> Self {
        Self::from_fn(shape, |_| T::lit(rng.gen_range(lo..hi)))
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn dim(&self, axis: usize) -> usize {
        self.shape[axis]
    }

    pub fn rank(&self) -> usize {
        self.shape.len()
    }

    pub fn numel(&self) -> usize {
        self.data.len()
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<T> {
        self.data
    }

    /// Value of a single-element tensor.
    pub fn item(&self) -> T {
        assert_eq!(self.data.len(), 1, "item() on tensor of shape {:?}", self.shape);
        self.data[0]
    }

    pub fn at(&self, idx: &[usize]) -> T {
        self.data[self.offset(idx)]
    }

    pub fn set(&mut self, idx: &[usize], v: T) {
        let o = self.offset(idx);
        self.data[o] = v;
    }

    fn offset(&self, idx: &[usize]) -> usize {
        assert_eq!(idx.len(), self.shape.len());
        let mut o = 0;
        for (&i, &d) in idx.iter().zip(&self.shape) {
            assert!(i < d, "index {idx:?} out of bounds for {:?}", self.shape);
            o = o * d + i;
        }
        o
    }

    pub fn reshape(&self, shape: &[usize]) -> Self {
        Self::new(shape, self.data.clone())
    }

    pub fn into_reshape(self, shape: &[usize]) -> Self {
        Self::new(shape, self.data)
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Self {
            shape: self.shape.clone(),
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn zip_map(&self, other: &Self, f: impl Fn(T, T) -> T) -> Self {
        assert_eq!(self.shape, other.shape, "zip_map shape mismatch");
        Self {
            shape: self.shape.clone(),
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        }
    }

    pub fn add_assign(&mut self, other: &Self) {
        assert_eq!(self.shape, other.shape, "add_assign shape mismatch");
        for (a, &b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
    }

    pub fn scale_inplace(&mut self, s: T) {
        for v in &mut self.data {
            *v *= s;
        }
    }

    pub fn sum(&self) -> T {
        self.data.iter().copied().sum()
    }

    pub fn max_abs(&self) -> T {
        self.data.iter().fold(T::zero(), |m, &v| m.max(v.abs()))
    }

    pub fn sq_norm(&self) -> T {
        self.data.iter().map(|&v| v * v).sum()
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Converts element type through `f64`.
    pub fn cast<U: Scalar>(&self) -> Tensor<U> {
        Tensor {
            shape: self.shape.clone(),
            data: self.data.iter().map(|&v| U::lit(v.as_f64())).collect(),
        }
    }

    pub fn to_f64_vec(&self) -> Vec<f64> {
        self.data.iter().map(|v| v.as_f64()).collect()
    }

    /// Generic axis permutation.
    pub fn permute(&self, perm: &[usize]) -> Self {
        assert_eq!(perm.len(), self.shape.len(), "permute rank mismatch");
        let out_shape: Vec<usize> = perm.iter().map(|&p| self.shape[p]).collect();
        let in_strides = strides_of(&self.shape);
        let src_strides: Vec<usize> = perm.iter().map(|&p| in_strides[p]).collect();
        let n = self.data.len();
        let mut out = Vec::with_capacity(n);
        if n == 0 {
            return Self::new(&out_shape, out);
        }
        let rank = out_shape.len();
        if rank == 0 {
            return self.clone();
        }
        let inner = out_shape[rank - 1];
        let inner_stride = src_strides[rank - 1];
        let mut idx = vec![0usize; rank];
        let outer = n / inner;
        for _ in 0..outer {
            let base: usize = idx[..rank - 1]
                .iter()
                .zip(&src_strides[..rank - 1])
                .map(|(i, s)| i * s)
                .sum();
            for j in 0..inner {
                out.push(self.data[base + j * inner_stride]);
            }
            for ax in (0..rank - 1).rev() {
                idx[ax] += 1;
                if idx[ax] < out_shape[ax] {
                    break;
                }
                idx[ax] = 0;
            }
        }
        Self::new(&out_shape, out)
    }

    /// Transpose of a rank-2 tensor.
    pub fn t(&self) -> Self {
        assert_eq!(self.rank(), 2, "t() needs a matrix");
        self.permute(&[1, 0])
    }

    /// Contiguous slice `[start, end)` along `axis`.
    pub fn slice_axis(&self, axis: usize, start: usize, end: usize) -> Self {
        assert!(start <= end && end <= self.shape[axis], "slice out of range");
        let outer: usize = self.shape[..axis].iter().product();
        let inner: usize = self.shape[axis + 1..].iter().product();
        let d = self.shape[axis];
        let len = end - start;
        let mut out = Vec::with_capacity(outer * len * inner);
        for o in 0..outer {
            let base = o * d * inner;
            out.extend_from_slice(&self.data[base + start * inner..base + end * inner]);
        }
        let mut shape = self.shape.clone();
        shape[axis] = len;
        Self::new(&shape, out)
    }

    pub fn concat(parts: &[&Self], axis: usize) -> Self {
        assert!(!parts.is_empty(), "concat of nothing");
        let first = parts[0].shape();
        let outer: usize = first[..axis].iter().product();
        let inner: usize = first[axis + 1..].iter().product();
        let mut total = 0;
        for p in parts {
            assert_eq!(p.rank(), first.len(), "concat rank mismatch");
            for (ax, (&a, &b)) in p.shape().iter().zip(first).enumerate() {
                assert!(ax == axis || a == b, "concat shape mismatch on axis {ax}");
            }
            total += p.shape()[axis];
        }
        let mut out = Vec::with_capacity(outer * total * inner);
        for o in 0..outer {
            for p in parts {
                let d = p.shape()[axis];
                out.extend_from_slice(&p.data[o * d * inner..(o + 1) * d * inner]);
            }
        }
        let mut shape = first.to_vec();
        shape[axis] = total;
        Self::new(&shape, out)
    }

    /// Stacks equally shaped tensors along a new leading axis.
    pub fn stack(parts: &[&Self]) -> Self {
        assert!(!parts.is_empty(), "stack of nothing");
        let inner = parts[0].shape().to_vec();
        let mut data = Vec::with_capacity(parts.len() * numel(&inner));
        for p in parts {
            assert_eq!(p.shape(), &inner[..], "stack shape mismatch");
            data.extend_from_slice(&p.data);
        }
        let mut shape = vec![parts.len()];
        shape.extend(inner);
        Self::new(&shape, data)
    }

    /// Materialises `self` broadcast to `shape` (numpy rules).
    pub fn broadcast_to(&self, shape: &[usize]) -> Self {
        if self.shape == shape {
            return self.clone();
        }
        let src = aligned_strides(&self.shape, shape);
        let mut out = Vec::with_capacity(numel(shape));
        strided_walk(shape, &src, |_, off| out.push(self.data[off]));
        Self::new(shape, out)
    }

    /// Sums a broadcast gradient back down to `shape`.
    pub fn reduce_to(&self, shape: &[usize]) -> Self {
        if self.shape == shape {
            return self.clone();
        }
        let dst = aligned_strides(shape, &self.shape);
        let mut out = vec![T::zero(); numel(shape)];
        let data = &self.data;
        strided_walk(&self.shape, &dst, |flat, off| out[off] += data[flat]);
        Self::new(shape, out)
    }

    /// `self (m x k) * other (k x n)` for rank-2 tensors.
    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(self.rank(), 2);
        assert_eq!(other.rank(), 2);
        let (m, k) = (self.shape[0], self.shape[1]);
        let (k2, n) = (other.shape[0], other.shape[1]);
        assert_eq!(k, k2, "matmul inner dimension mismatch");
        let mut out = vec![T::zero(); m * n];
        gemm_into(
            m,
            k,
            n,
            T::one(),
            &self.data,
            (k as isize, 1),
            &other.data,
            (n as isize, 1),
            T::zero(),
            &mut out,
        );
        Self::new(&[m, n], out)
    }
}

/// Strides of `src` aligned to the broadcast shape `dst`; broadcast axes get stride 0.
pub(crate) fn aligned_strides(src: &[usize], dst: &[usize]) -> Vec<usize> {
    assert!(src.len() <= dst.len(), "cannot broadcast {src:?} to {dst:?}");
    let s = strides_of(src);
    let pad = dst.len() - src.len();
    (0..dst.len())
        .map(|ax| {
            if ax < pad {
                0
            } else {
                let d = src[ax - pad];
                assert!(
                    d == dst[ax] || d == 1,
                    "cannot broadcast {src:?} to {dst:?}"
                );
                if d == 1 {
                    0
                } else {
                    s[ax - pad]
                }
            }
        })
        .collect()
}

/// Walks `shape` in row-major order, handing each flat index together with
/// the matching offset under `strides` (maintained incrementally).
fn strided_walk(shape: &[usize], strides: &[usize], mut f: impl FnMut(usize, usize)) {
    let n = numel(shape);
    if n == 0 {
        return;
    }
    let rank = shape.len();
    if rank == 0 {
        f(0, 0);
        return;
    }
    let inner = shape[rank - 1];
    let inner_stride = strides[rank - 1];
    let mut idx = vec![0usize; rank];
    let mut base = 0usize;
    let mut flat = 0usize;
    while flat < n {
        for j in 0..inner {
            f(flat + j, base + j * inner_stride);
        }
        flat += inner;
        for ax in (0..rank - 1).rev() {
            idx[ax] += 1;
            base += strides[ax];
            if idx[ax] < shape[ax] {
                break;
            }
            base -= strides[ax] * idx[ax];
            idx[ax] = 0;
        }
    }
}

/// Broadcast result shape under numpy rules.
pub fn broadcast_shape(a: &[usize], b: &[usize]) -> Vec<usize> {
    let rank = a.len().max(b.len());
    (0..rank)
        .map(|i| {
            let da = if i + a.len() >= rank { a[i + a.len() - rank] } else { 1 };
            let db = if i + b.len() >= rank { b[i + b.len() - rank] } else { 1 };
            if da == db || db == 1 {
                da
            } else if da == 1 {
                db
            } else {
                panic!("shapes {a:?} and {b:?} do not broadcast")
            }
        })
        .collect()
}

/// Thin safe wrapper over the strided GEMM kernel; `out` is row-major `m x n`.
#[allow(clippy::too_many_arguments)]
pub(crate) fn gemm_into<T: Scalar>(
    m: usize,
    k: usize,
    n: usize,
    alpha: T,
    a: &[T],
    a_strides: (isize, isize),
    b: &[T],
    b_strides: (isize, isize),
    beta: T,
    out: &mut [T],
) {
    assert!(out.len() >= m * n);
    if m == 0 || n == 0 {
        return;
    }
    if k == 0 {
        for v in &mut out[..m * n] {
            *v *= beta;
        }
        return;
    }
    let max_a = (m - 1) as isize * a_strides.0 + (k - 1) as isize * a_strides.1;
    let max_b = (k - 1) as isize * b_strides.0 + (n - 1) as isize * b_strides.1;
    assert!((max_a as usize) < a.len() && (max_b as usize) < b.len());
    // SAFETY: bounds of all three operands were checked above and `out` is
    // exclusively borrowed.
    unsafe {
        T::gemm(
            m,
            k,
            n,
            alpha,
            a.as_ptr(),
            a_strides.0,
            a_strides.1,
            b.as_ptr(),
            b_strides.0,
            b_strides.1,
            beta,
            out.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn permute_matches_index_arithmetic() {
        let t = Tensor::<f64>::from_fn(&[2, 3, 4], |i| i as f64);
        let p = t.permute(&[2, 0, 1]);
        assert_eq!(p.shape(), &[4, 2, 3]);
        for a in 0..2 {
            for b in 0..3 {
                for c in 0..4 {
                    assert_eq!(p.at(&[c, a, b]), t.at(&[a, b, c]));
                }
            }
        }
    }

    #[test]
    fn broadcast_and_reduce_are_adjoint() {
        let t = Tensor::<f64>::from_fn(&[3, 1], |i| i as f64 + 1.0);
        let b = t.broadcast_to(&[2, 3, 4]);
        assert_eq!(b.at(&[1, 2, 3]), 3.0);
        let r = b.reduce_to(&[3, 1]);
        assert_eq!(r.data(), &[8.0, 16.0, 24.0]);
    }

    #[test]
    fn matmul_small() {
        let a = Tensor::<f32>::from_f64(&[2, 2], &[1.0, 2.0, 3.0, 4.0]);
        let b = Tensor::<f32>::from_f64(&[2, 1], &[1.0, 1.0]);
        assert_eq!(a.matmul(&b).data(), &[3.0, 7.0]);
    }

    #[test]
    fn slice_and_concat_roundtrip() {
        let t = Tensor::<f64>::from_fn(&[2, 5, 3], |i| i as f64);
        let a = t.slice_axis(1, 0, 2);
        let b = t.slice_axis(1, 2, 5);
        assert_eq!(Tensor::concat(&[&a, &b], 1), t);
    }
}
