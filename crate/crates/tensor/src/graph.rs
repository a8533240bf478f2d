use std::cell::RefCell;
use std::collections::HashMap;
use std::rc::Rc;

use crate::params::{ParamId, ParamStore};
use crate::{Scalar, Tensor};

/// Handle to a value recorded on a [`Graph`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(pub(crate) usize);

/// Maps the upstream gradient of a node to one optional gradient per parent.
pub type BackwardFn<T> = Box<dyn Fn(&Tensor<T>) -> Vec<Option<Tensor<T>>>>;

#[derive(Clone, Copy, PartialEq, Eq)]
enum Leaf {
    Interior,
    Constant,
    Input,
    Param(ParamId),
}

struct Node<T> {
    value: Rc<Tensor<T>>,
    parents: Vec<usize>,
    backward: Option<BackwardFn<T>>,
    needs_grad: bool,
    leaf: Leaf,
}

/// Reverse-mode tape. Every operation appends a node holding its value and,
/// when any parent is differentiable, a closure producing parent gradients.
///
/// A graph is single-threaded and append-only; build a fresh one per step.
pub struct Graph<T: Scalar> {
    nodes: RefCell<Vec<Node<T>>>,
    param_vars: RefCell<HashMap<ParamId, Var>>,
}

impl<T: Scalar> Default for Graph<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Scalar> Graph<T> {
    pub fn new() -> Self {
        Self {
            nodes: RefCell::new(Vec::new()),
            param_vars: RefCell::new(HashMap::new()),
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.borrow().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn push(&self, node: Node<T>) -> Var {
        let mut nodes = self.nodes.borrow_mut();
        nodes.push(node);
        Var(nodes.len() - 1)
    }

    /// Non-differentiable leaf.
    pub fn constant(&self, t: Tensor<T>) -> Var {
        self.push(Node {
            value: Rc::new(t),
            parents: vec![],
            backward: None,
            needs_grad: false,
            leaf: Leaf::Constant,
        })
    }

    pub fn scalar(&self, v: T) -> Var {
        self.constant(Tensor::scalar(v))
    }

    /// Differentiable leaf whose gradient is reported by [`Gradients::wrt`].
    pub fn input(&self, t: Tensor<T>) -> Var {
        self.push(Node {
            value: Rc::new(t),
            parents: vec![],
            backward: None,
            needs_grad: true,
            leaf: Leaf::Input,
        })
    }

    /// Leaf bound to a stored parameter. Repeated calls return the same node.
    pub fn param(&self, store: &ParamStore<T>, id: ParamId) -> Var {
        if let Some(&v) = self.param_vars.borrow().get(&id) {
            return v;
        }
        let v = self.push(Node {
            value: Rc::new(store.get(id).clone()),
            parents: vec![],
            backward: None,
            needs_grad: true,
            leaf: Leaf::Param(id),
        });
        self.param_vars.borrow_mut().insert(id, v);
        v
    }

    /// Stop-gradient: same value, no path back to `v`.
    pub fn detach(&self, v: Var) -> Var {
        let value = self.value(v);
        self.push(Node {
            value,
            parents: vec![],
            backward: None,
            needs_grad: false,
            leaf: Leaf::Constant,
        })
    }

    pub fn value(&self, v: Var) -> Rc<Tensor<T>> {
        Rc::clone(&self.nodes.borrow()[v.0].value)
    }

    pub fn shape(&self, v: Var) -> Vec<usize> {
        self.nodes.borrow()[v.0].value.shape().to_vec()
    }

    pub fn item(&self, v: Var) -> T {
        self.nodes.borrow()[v.0].value.item()
    }

    pub fn needs_grad(&self, v: Var) -> bool {
        self.nodes.borrow()[v.0].needs_grad
    }

    /// Records an operation. `backward` is dropped when no parent is differentiable.
    pub fn custom<F>(&self, parents: &[Var], value: Tensor<T>, backward: F) -> Var
    where
        F: Fn(&Tensor<T>) -> Vec<Option<Tensor<T>>> + 'static,
    {
        let needs_grad = {
            let nodes = self.nodes.borrow();
            parents.iter().any(|p| nodes[p.0].needs_grad)
        };
        self.push(Node {
            value: Rc::new(value),
            parents: parents.iter().map(|p| p.0).collect(),
            backward: if needs_grad {
                Some(Box::new(backward))
            } else {
                None
            },
            needs_grad,
            leaf: Leaf::Interior,
        })
    }

    /// Gradient of the scalar `root` with respect to every differentiable leaf.
    pub fn backward(&self, root: Var) -> Gradients<T> {
        let nodes = self.nodes.borrow();
        let root_val = &nodes[root.0].value;
        assert_eq!(root_val.numel(), 1, "backward root must be a scalar");
        let mut grads: Vec<Option<Tensor<T>>> = (0..=root.0).map(|_| None).collect();
        grads[root.0] = Some(Tensor::full(root_val.shape(), T::one()));
        let mut out = Gradients {
            leaves: HashMap::new(),
            params: HashMap::new(),
        };
        for i in (0..=root.0).rev() {
            let node = &nodes[i];
            if !node.needs_grad {
                continue;
            }
            let Some(g) = grads[i].take() else { continue };
            match node.leaf {
                Leaf::Param(id) => {
                    out.params.insert(id, g);
                    continue;
                }
                Leaf::Input => {
                    out.leaves.insert(i, g);
                    continue;
                }
                Leaf::Constant => continue,
                Leaf::Interior => {}
            }
            let Some(back) = node.backward.as_ref() else { continue };
            let pgrads = back(&g);
            debug_assert_eq!(pgrads.len(), node.parents.len());
            for (&p, pg) in node.parents.iter().zip(pgrads) {
                let Some(pg) = pg else { continue };
                if !nodes[p].needs_grad {
                    continue;
                }
                debug_assert_eq!(
                    pg.shape(),
                    nodes[p].value.shape(),
                    "gradient shape mismatch"
                );
                match &mut grads[p] {
                    Some(acc) => acc.add_assign(&pg),
                    slot @ None => *slot = Some(pg),
                }
            }
        }
        out
    }
}

/// Result of [`Graph::backward`].
#[derive(Debug)]
pub struct Gradients<T> {
    leaves: HashMap<usize, Tensor<T>>,
    params: HashMap<ParamId, Tensor<T>>,
}

impl<T: Scalar> Gradients<T> {
    /// Gradient of an [`Graph::input`] leaf; zeros-shaped `None` when unreachable.
    pub fn wrt(&self, v: Var) -> Option<&Tensor<T>> {
        self.leaves.get(&v.0)
    }

    pub fn param(&self, id: ParamId) -> Option<&Tensor<T>> {
        self.params.get(&id)
    }

    pub fn params(&self) -> impl Iterator<Item = (ParamId, &Tensor<T>)> {
        self.params.iter().map(|(&k, v)| (k, v))
    }

    pub fn take_param(&mut self, id: ParamId) -> Option<Tensor<T>> {
        self.params.remove(&id)
    }
}
