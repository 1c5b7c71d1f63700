//! Adam with bias correction.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::params::ParamStore;
use super::tape::Gradients;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Adam {
    pub config: AdamConfig,
    step: u64,
    moments: Vec<Option<(Array2<f64>, Array2<f64>)>>,
}

impl Adam {
    pub fn new(config: AdamConfig) -> Self {
        Adam {
            config,
            step: 0,
            moments: Vec::new(),
        }
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    /// Applies one update to every trainable parameter that received a
    /// gradient. A non-finite gradient aborts the step before any change.
    pub fn step(&mut self, store: &mut ParamStore, grads: &Gradients) -> Result<()> {
        for (id, g) in grads.params() {
            if store.is_trainable(id) && !g.iter().all(|v| v.is_finite()) {
                return Err(Error::NonFiniteGradient(store.name(id).to_string()));
            }
        }
        self.step += 1;
        if self.moments.len() < store.len() {
            self.moments.resize(store.len(), None);
        }
        let AdamConfig { lr, beta1, beta2, eps } = self.config;
        let c1 = 1.0 - beta1.powi(self.step as i32);
        let c2 = 1.0 - beta2.powi(self.step as i32);
        for (id, g) in grads.params() {
            if !store.is_trainable(id) {
                continue;
            }
            let (m, v) =
                self.moments[id.index()].get_or_insert_with(|| (Array2::zeros(g.dim()), Array2::zeros(g.dim())));
            m.zip_mut_with(g, |m, &g| *m = beta1 * *m + (1.0 - beta1) * g);
            v.zip_mut_with(g, |v, &g| *v = beta2 * *v + (1.0 - beta2) * g * g);
            let p = store.get_mut(id);
            ndarray::Zip::from(p).and(&*m).and(&*v).for_each(|p, &m, &v| {
                *p -= lr * (m / c1) / ((v / c2).sqrt() + eps);
            });
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::tape::Tape;
    use ndarray::array;

    /// Gradients of `sum(x^2)` for the first parameter.
    fn grads_for(store: &ParamStore) -> Gradients {
        let mut t = Tape::new();
        let id = store.ids().next().unwrap();
        let x = t.param(store, id);
        let sq = t.square(x).unwrap();
        let loss = t.sum(sq).unwrap();
        t.backward(loss).unwrap()
    }

    #[test]
    fn zero_gradient_leaves_params() {
        let mut store = ParamStore::new();
        let id = store.add("x", array![[0.0, 0.0]]);
        let g = grads_for(&store);
        assert_eq!(g.param(id).unwrap(), &array![[0.0, 0.0]]);
        let mut adam = Adam::new(AdamConfig::default());
        adam.step(&mut store, &g).unwrap();
        assert_eq!(store.get(id), &array![[0.0, 0.0]]);
        assert_eq!(adam.steps(), 1);
    }

    #[test]
    fn constant_gradient_moves_by_lr() {
        let mut store = ParamStore::new();
        let id = store.add("x", array![[0.0]]);
        let mut adam = Adam::new(AdamConfig::default());
        let mut last = 0.0;
        for _ in 0..200 {
            let mut t = Tape::new();
            let x = t.param(&store, id);
            let loss = t.scale(x, 3.0).unwrap();
            let g = t.backward(loss).unwrap();
            last = store.get(id)[[0, 0]];
            adam.step(&mut store, &g).unwrap();
        }
        let delta = last - store.get(id)[[0, 0]];
        assert!((delta - 1e-3).abs() < 1e-9, "{delta}");
    }

    #[test]
    fn quadratic_bowl_converges() {
        let mut store = ParamStore::new();
        let id = store.add("x", array![[5.0]]);
        let mut adam = Adam::new(AdamConfig {
            lr: 0.05,
            ..AdamConfig::default()
        });
        for _ in 0..500 {
            let g = grads_for(&store);
            adam.step(&mut store, &g).unwrap();
        }
        assert!(store.get(id)[[0, 0]].abs() < 0.1);
    }

    #[test]
    fn non_finite_gradient_aborts() {
        let mut store = ParamStore::new();
        let id = store.add("x", array![[f64::INFINITY]]);
        let g = grads_for(&store);
        let before = store.clone();
        let mut adam = Adam::new(AdamConfig::default());
        assert!(matches!(adam.step(&mut store, &g), Err(Error::NonFiniteGradient(n)) if n == "x"));
        assert_eq!(store.get(id), before.get(id));
        assert_eq!(adam.steps(), 0);
    }
}
