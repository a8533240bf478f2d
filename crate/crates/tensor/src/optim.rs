use crate::{Gradients, ParamId, ParamStore, Scalar, Tensor};

/// Hyperparameters of [`AdamW`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdamWConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
}

impl Default for AdamWConfig {
    fn default() -> Self {
        Self {
            lr: 2e-4,
            beta1: 0.8,
            beta2: 0.99,
            eps: 1e-9,
            weight_decay: 0.01,
        }
    }
}

/// Adam with decoupled weight decay over a fixed subset of a [`ParamStore`].
#[derive(Clone, Debug)]
pub struct AdamW<T> {
    pub config: AdamWConfig,
    params: Vec<ParamId>,
    m: Vec<Tensor<T>>,
    v: Vec<Tensor<T>>,
    step: u64,
}

impl<T: Scalar> AdamW<T> {
    pub fn new(store: &ParamStore<T>, params: Vec<ParamId>, config: AdamWConfig) -> Self {
        let m = params
            .iter()
            .map(|&id| Tensor::zeros(store.get(id).shape()))
            .collect::<Vec<_>>();
        let v = m.clone();
        Self {
            config,
            params,
            m,
            v,
            step: 0,
        }
    }

    pub fn params(&self) -> &[ParamId] {
        &self.params
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    /// First and second moment buffers, in parameter order.
    pub fn moments(&self) -> (&[Tensor<T>], &[Tensor<T>]) {
        (&self.m, &self.v)
    }

    /// Restores state saved from an optimizer over the same parameter list.
    pub fn restore(&mut self, step: u64, m: Vec<Tensor<T>>, v: Vec<Tensor<T>>) {
        assert_eq!(m.len(), self.params.len());
        assert_eq!(v.len(), self.params.len());
        self.step = step;
        self.m = m;
        self.v = v;
    }

    /// Global L2 norm of this optimizer's gradients.
    pub fn grad_norm(&self, grads: &Gradients<T>) -> T {
        self.params
            .iter()
            .filter_map(|&id| grads.param(id))
            .map(Tensor::sq_norm)
            .sum::<T>()
            .sqrt()
    }

    /// One update. Parameters without a gradient are treated as having a zero
    /// gradient (moments decay, weight decay still applies). When
    /// `clip_norm` is set, gradients are rescaled to that global norm first.
    /// Returns the pre-clipping gradient norm.
    pub fn step(
        &mut self,
        store: &mut ParamStore<T>,
        grads: &Gradients<T>,
        clip_norm: Option<f64>,
    ) -> T {
        let norm = self.grad_norm(grads);
        let clip = match clip_norm {
            Some(c) if norm.as_f64() > c => T::lit(c) / (norm + T::lit(1e-6)),
            _ => T::one(),
        };
        self.step += 1;
        let c = self.config;
        let (b1, b2) = (T::lit(c.beta1), T::lit(c.beta2));
        let bc1 = T::one() - T::lit(c.beta1.powi(self.step as i32));
        let bc2 = T::one() - T::lit(c.beta2.powi(self.step as i32));
        let lr = T::lit(c.lr);
        let eps = T::lit(c.eps);
        let decay = T::one() - lr * T::lit(c.weight_decay);
        for (i, &id) in self.params.iter().enumerate() {
            let g = grads.param(id);
            let p = store.get_mut(id);
            let m = self.m[i].data_mut();
            let v = self.v[i].data_mut();
            let pd = p.data_mut();
            for j in 0..pd.len() {
                let gj = g.map_or(T::zero(), |g| g.data()[j] * clip);
                m[j] = b1 * m[j] + (T::one() - b1) * gj;
                v[j] = b2 * v[j] + (T::one() - b2) * gj * gj;
                let mhat = m[j] / bc1;
                let vhat = v[j] / bc2;
                pd[j] = pd[j] * decay - lr * mhat / (vhat.sqrt() + eps);
            }
        }
        norm
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::Graph;

    #[test]
    fn adamw_minimises_quadratic() {
        let mut store = ParamStore::<f64>::new();
        let id = store.add("x", Tensor::from_f64(&[2], &[3.0, -2.0]));
        let mut opt = AdamW::new(
            &store,
            vec![id],
            AdamWConfig {
                lr: 0.05,
                weight_decay: 0.0,
                ..AdamWConfig::default()
            },
        );
        for _ in 0..500 {
            let g = Graph::new();
            let x = g.param(&store, id);
            let l = g.sum_all(g.square(x));
            let grads = g.backward(l);
            opt.step(&mut store, &grads, None);
        }
        assert!(store.get(id).max_abs() < 1e-2);
    }

    #[test]
    fn first_step_moves_by_lr() {
        let mut store = ParamStore::<f64>::new();
        let id = store.add("x", Tensor::from_f64(&[1], &[1.0]));
        let mut opt = AdamW::new(&store, vec![id], AdamWConfig::default());
        let g = Graph::new();
        let x = g.param(&store, id);
        let l = g.sum_all(g.scale(x, 3.0));
        let grads = g.backward(l);
        opt.step(&mut store, &grads, None);
        // bias-corrected first step is exactly -lr * sign(g), plus decoupled decay
        let expected = 1.0 * (1.0 - 2e-4 * 0.01) - 2e-4;
        assert!((store.get(id).item() - expected).abs() < 1e-12);
    }
}
