use ndarray::{Array2, Zip};

use crate::params::{Gradients, ParamStore};
use crate::scalar::Scalar;

#[derive(Debug, Clone)]
pub struct Adam<T> {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    step: u64,
    m: Vec<Array2<T>>,
    v: Vec<Array2<T>>,
}

impl<T: Scalar> Adam<T> {
    pub fn new(params: &ParamStore<T>, learning_rate: f64) -> Self {
        let zeros: Vec<Array2<T>> = params.iter().map(|(_, p)| Array2::zeros(p.raw_dim())).collect();
        Self {
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            step: 0,
            m: zeros.clone(),
            v: zeros,
        }
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    /// One bias-corrected update. Parameters without a gradient are left
    /// alone and their moments do not decay.
    pub fn step(&mut self, params: &mut ParamStore<T>, grads: &Gradients<T>) {
        self.step += 1;
        let t = self.step as i32;
        let lr = self.learning_rate * (1.0 - self.beta2.powi(t)).sqrt() / (1.0 - self.beta1.powi(t));
        let (b1, b2) = (T::lit(self.beta1), T::lit(self.beta2));
        let (lr, eps) = (T::lit(lr), T::lit(self.eps));
        let one = T::one();
        for (id, p) in params.values_mut().enumerate() {
            let Some(g) = grads.get(id) else { continue };
            Zip::from(p)
                .and(&mut self.m[id])
                .and(&mut self.v[id])
                .and(g)
                .for_each(|p, m, v, &g| {
                    *m = b1 * *m + (one - b1) * g;
                    *v = b2 * *v + (one - b2) * g * g;
                    *p -= lr * *m / (v.sqrt() + eps);
                });
        }
    }
}

/// Rescales `grads` so their global L2 norm is at most `max_norm`.
/// Returns the original norm when clipping happened.
pub fn clip_global_norm<T: Scalar>(grads: &mut Gradients<T>, max_norm: f64) -> Option<f64> {
    let norm = grads.global_norm();
    if max_norm > 0.0 && norm > max_norm {
        grads.scale(T::lit(max_norm / norm));
        Some(norm)
    } else {
        None
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn first_step_moves_by_learning_rate() {
        let mut store = ParamStore::new();
        let id = store.add("w", array![[1.0f64, -1.0]]);
        let mut g = Gradients::new(1);
        g.accumulate(id, &array![[0.5, -2.0]]);
        let mut adam = Adam::new(&store, 0.1);
        adam.step(&mut store, &g);
        let w = store.get(id);
        assert!((w[[0, 0]] - 0.9).abs() < 1e-6);
        assert!((w[[0, 1]] + 0.9).abs() < 1e-6);
    }

    #[test]
    fn clipping_caps_the_norm() {
        let mut store = ParamStore::<f64>::new();
        let id = store.add("w", array![[0.0, 0.0]]);
        let mut g = Gradients::new(1);
        g.accumulate(id, &array![[3.0, 4.0]]);
        assert_eq!(clip_global_norm(&mut g, 1.0), Some(5.0));
        assert!((g.global_norm() - 1.0).abs() < 1e-12);
        assert_eq!(clip_global_norm(&mut g, 2.0), None);
    }
}
