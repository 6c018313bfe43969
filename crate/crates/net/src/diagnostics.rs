//! Numerical gradient verification.

use crate::batch::Batch;
use crate::graph::Graph;
use crate::loss::total_loss;
use crate::model::CompletionModel;
use crate::train::batch_gradients;

/// Gradient norms below this are indistinguishable from finite-difference
/// round-off (key biases, for instance, cancel in the softmax).
pub const ZERO_GRADIENT: f64 = 1e-8;

#[derive(Debug, Clone)]
pub struct TensorCheck {
    pub name: String,
    /// `|analytic - numeric| / max(|analytic|, |numeric|)` in L2 norm over
    /// the tensor; 0 when both norms are below [`ZERO_GRADIENT`].
    pub relative_error: f64,
    pub max_abs_error: f64,
}

#[derive(Debug, Clone)]
pub struct GradientCheck {
    pub tensors: Vec<TensorCheck>,
    pub scalars: usize,
}

impl GradientCheck {
    pub fn max_relative_error(&self) -> f64 {
        self.tensors.iter().map(|t| t.relative_error).fold(0.0, f64::max)
    }

    pub fn worst(&self) -> Option<&TensorCheck> {
        self.tensors.iter().max_by(|a, b| a.relative_error.total_cmp(&b.relative_error))
    }
}

fn loss_of(model: &CompletionModel<f64>, batch: &Batch<f64>) -> f64 {
    let mut g = Graph::new(model.params());
    let heads = model.forward(&mut g, &batch.source, batch.decoder_input.as_ref());
    total_loss(&heads.values(&g), &batch.targets).0.total
}

/// Compares tape gradients of the total loss with central differences of
/// step `eps`, parameter by parameter. Dropout is disabled.
pub fn gradient_check(model: &mut CompletionModel<f64>, batch: &Batch<f64>, eps: f64) -> GradientCheck {
    let (_, grads) = batch_gradients(model, batch, None);
    let mut tensors = Vec::new();
    let mut scalars = 0;
    for id in 0..model.params().len() {
        let name = model.params().name(id).to_string();
        let shape = model.params().get(id).raw_dim();
        let analytic = grads.get(id).cloned().unwrap_or_else(|| ndarray::Array2::zeros(shape));
        let mut numeric = ndarray::Array2::zeros(shape);
        for idx in ndarray::indices(shape) {
            let orig = model.params().get(id)[idx];
            model.params_mut().get_mut(id)[idx] = orig + eps;
            let up = loss_of(model, batch);
            model.params_mut().get_mut(id)[idx] = orig - eps;
            let down = loss_of(model, batch);
            model.params_mut().get_mut(id)[idx] = orig;
            numeric[idx] = (up - down) / (2.0 * eps);
            scalars += 1;
        }
        let norm = |a: &ndarray::Array2<f64>| a.iter().map(|v| v * v).sum::<f64>().sqrt();
        let diff = &analytic - &numeric;
        let scale = norm(&analytic).max(norm(&numeric));
        tensors.push(TensorCheck {
            name,
            relative_error: if scale < ZERO_GRADIENT { 0.0 } else { norm(&diff) / scale },
            max_abs_error: diff.iter().fold(0.0, |m, v| m.max(v.abs())),
        });
    }
    GradientCheck { tensors, scalars }
}
