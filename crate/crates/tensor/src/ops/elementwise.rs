use std::rc::Rc;

use crate::tensor::broadcast_shape;
use crate::{Graph, Scalar, Tensor, Var};

#[derive(Clone, Copy)]
enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
}

fn expand<T: Scalar>(t: &Rc<Tensor<T>>, shape: &[usize]) -> Rc<Tensor<T>> {
    if t.shape() == shape {
        Rc::clone(t)
    } else {
        Rc::new(t.broadcast_to(shape))
    }
}

impl<T: Scalar> Graph<T> {
    fn binary(&self, a: Var, b: Var, op: BinOp) -> Var {
        let av = self.value(a);
        let bv = self.value(b);
        let shape = broadcast_shape(av.shape(), bv.shape());
        let ae = expand(&av, &shape);
        let be = expand(&bv, &shape);
        let value = match op {
            BinOp::Add => ae.zip_map(&be, |x, y| x + y),
            BinOp::Sub => ae.zip_map(&be, |x, y| x - y),
            BinOp::Mul => ae.zip_map(&be, |x, y| x * y),
            BinOp::Div => ae.zip_map(&be, |x, y| x / y),
        };
        let a_shape = av.shape().to_vec();
        let b_shape = bv.shape().to_vec();
        let (need_a, need_b) = (self.needs_grad(a), self.needs_grad(b));
        self.custom(&[a, b], value, move |g| {
            let (ga, gb) = match op {
                BinOp::Add => (
                    need_a.then(|| g.reduce_to(&a_shape)),
                    need_b.then(|| g.reduce_to(&b_shape)),
                ),
                BinOp::Sub => (
                    need_a.then(|| g.reduce_to(&a_shape)),
                    need_b.then(|| g.map(|v| -v).reduce_to(&b_shape)),
                ),
                BinOp::Mul => (
                    need_a.then(|| g.zip_map(&be, |gv, y| gv * y).reduce_to(&a_shape)),
                    need_b.then(|| g.zip_map(&ae, |gv, x| gv * x).reduce_to(&b_shape)),
                ),
                BinOp::Div => (
                    need_a.then(|| g.zip_map(&be, |gv, y| gv / y).reduce_to(&a_shape)),
                    need_b.then(|| {
                        let t = g.zip_map(&ae, |gv, x| gv * x);
                        t.zip_map(&be, |tv, y| -tv / (y * y)).reduce_to(&b_shape)
                    }),
                ),
            };
            vec![ga, gb]
        })
    }

    /// Broadcasting addition.
    pub fn add(&self, a: Var, b: Var) -> Var {
        self.binary(a, b, BinOp::Add)
    }

    pub fn sub(&self, a: Var, b: Var) -> Var {
        self.binary(a, b, BinOp::Sub)
    }

    pub fn mul(&self, a: Var, b: Var) -> Var {
        self.binary(a, b, BinOp::Mul)
    }

    pub fn div(&self, a: Var, b: Var) -> Var {
        self.binary(a, b, BinOp::Div)
    }

    /// Elementwise map with derivative expressed through input `x` and output `y`.
    pub fn unary(
        &self,
        a: Var,
        f: impl Fn(T) -> T,
        df: impl Fn(T, T) -> T + 'static,
    ) -> Var {
        let av = self.value(a);
        let value = av.map(f);
        let out = Rc::new(value.clone());
        self.custom(&[a], value, move |g| {
            let d = av.zip_map(&out, &df);
            vec![Some(g.zip_map(&d, |gv, dv| gv * dv))]
        })
    }

    pub fn neg(&self, a: Var) -> Var {
        self.scale(a, -T::one())
    }

    pub fn scale(&self, a: Var, s: T) -> Var {
        self.unary(a, move |x| x * s, move |_, _| s)
    }

    pub fn add_scalar(&self, a: Var, s: T) -> Var {
        self.unary(a, move |x| x + s, |_, _| T::one())
    }

    pub fn exp(&self, a: Var) -> Var {
        self.unary(a, T::exp, |_, y| y)
    }

    pub fn log(&self, a: Var) -> Var {
        self.unary(a, T::ln, |x, _| x.recip())
    }

    pub fn sqrt(&self, a: Var) -> Var {
        self.unary(a, T::sqrt, |_, y| T::lit(0.5) / y)
    }

    pub fn square(&self, a: Var) -> Var {
        self.unary(a, |x| x * x, |x, _| x + x)
    }

    pub fn abs(&self, a: Var) -> Var {
        self.unary(a, T::abs, |x, _| {
            if x > T::zero() {
                T::one()
            } else if x < T::zero() {
                -T::one()
            } else {
                T::zero()
            }
        })
    }

    pub fn tanh(&self, a: Var) -> Var {
        self.unary(a, T::tanh, |_, y| T::one() - y * y)
    }

    pub fn sigmoid(&self, a: Var) -> Var {
        self.unary(a, sigmoid, |_, y| y * (T::one() - y))
    }

    pub fn relu(&self, a: Var) -> Var {
        self.unary(
            a,
            |x| x.max(T::zero()),
            |x, _| if x > T::zero() { T::one() } else { T::zero() },
        )
    }

    pub fn leaky_relu(&self, a: Var, slope: T) -> Var {
        self.unary(
            a,
            move |x| if x > T::zero() { x } else { x * slope },
            move |x, _| if x > T::zero() { T::one() } else { slope },
        )
    }

    /// `x * sigmoid(x)`.
    pub fn silu(&self, a: Var) -> Var {
        self.unary(
            a,
            |x| x * sigmoid(x),
            |x, _| {
                let s = sigmoid(x);
                s * (T::one() + x * (T::one() - s))
            },
        )
    }

    /// `max(x, floor)`; gradient passes only where `x > floor`.
    pub fn clamp_min(&self, a: Var, floor: T) -> Var {
        self.unary(
            a,
            move |x| x.max(floor),
            move |x, _| if x > floor { T::one() } else { T::zero() },
        )
    }

    /// Gated linear unit along `axis`: first half times sigmoid of second half.
    pub fn glu(&self, a: Var, axis: usize) -> Var {
        let d = self.shape(a)[axis];
        assert!(d.is_multiple_of(2), "glu needs an even axis");
        let x = self.slice(a, axis, 0, d / 2);
        let gate = self.slice(a, axis, d / 2, d);
        let s = self.sigmoid(gate);
        self.mul(x, s)
    }
}

#[inline]
pub(crate) fn sigmoid<T: Scalar>(x: T) -> T {
    if x >= T::zero() {
        T::one() / (T::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (T::one() + e)
    }
}
