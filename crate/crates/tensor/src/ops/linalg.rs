use std::rc::Rc;

use crate::tensor::gemm_into;
use crate::{Graph, Scalar, Tensor, Var};

/// `op(a) * op(b)` where `op` optionally transposes the last two axes.
/// Accepts matrices or equally batched rank-3 stacks.
pub fn mm<T: Scalar>(a: &Tensor<T>, ta: bool, b: &Tensor<T>, tb: bool) -> Tensor<T> {
    assert_eq!(a.rank(), b.rank(), "mm rank mismatch");
    let (batch, ar, ac, br, bc) = match a.rank() {
        2 => (1, a.dim(0), a.dim(1), b.dim(0), b.dim(1)),
        3 => {
            assert_eq!(a.dim(0), b.dim(0), "mm batch mismatch");
            (a.dim(0), a.dim(1), a.dim(2), b.dim(1), b.dim(2))
        }
        r => panic!("mm supports rank 2 or 3, got {r}"),
    };
    let (m, k) = if ta { (ac, ar) } else { (ar, ac) };
    let (k2, n) = if tb { (bc, br) } else { (br, bc) };
    assert_eq!(k, k2, "mm inner dimension mismatch: {:?} x {:?}", a.shape(), b.shape());
    let a_str = if ta { (1, ac as isize) } else { (ac as isize, 1) };
    let b_str = if tb { (1, bc as isize) } else { (bc as isize, 1) };
    let mut out = vec![T::zero(); batch * m * n];
    for i in 0..batch {
        gemm_into(
            m,
            k,
            n,
            T::one(),
            &a.data()[i * ar * ac..(i + 1) * ar * ac],
            a_str,
            &b.data()[i * br * bc..(i + 1) * br * bc],
            b_str,
            T::zero(),
            &mut out[i * m * n..(i + 1) * m * n],
        );
    }
    if a.rank() == 2 {
        Tensor::new(&[m, n], out)
    } else {
        Tensor::new(&[batch, m, n], out)
    }
}

impl<T: Scalar> Graph<T> {
    fn matmul_flags(&self, a: Var, ta: bool, b: Var, tb: bool) -> Var {
        let av: Rc<Tensor<T>> = self.value(a);
        let bv: Rc<Tensor<T>> = self.value(b);
        let value = mm(&av, ta, &bv, tb);
        let (need_a, need_b) = (self.needs_grad(a), self.needs_grad(b));
        self.custom(&[a, b], value, move |g| {
            let ga = need_a.then(|| {
                if ta {
                    mm(&bv, tb, g, true)
                } else {
                    mm(g, false, &bv, !tb)
                }
            });
            let gb = need_b.then(|| {
                if tb {
                    mm(g, true, &av, ta)
                } else {
                    mm(&av, !ta, g, false)
                }
            });
            vec![ga, gb]
        })
    }

    /// Matrix (or batched matrix) product.
    pub fn matmul(&self, a: Var, b: Var) -> Var {
        self.matmul_flags(a, false, b, false)
    }

    /// `a * b^T`.
    pub fn matmul_nt(&self, a: Var, b: Var) -> Var {
        self.matmul_flags(a, false, b, true)
    }

    /// `a^T * b`.
    pub fn matmul_tn(&self, a: Var, b: Var) -> Var {
        self.matmul_flags(a, true, b, false)
    }
}
