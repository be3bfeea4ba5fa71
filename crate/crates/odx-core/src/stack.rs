//! Ordered layer stacks: shape validation, forward traces, reverse passes.

use crate::error::{Error, Result};
use crate::layer::{LayerGrads, LayerSpec};
use crate::tensor::Tensor;

#[derive(Debug, Clone, PartialEq)]
pub struct LayerStack {
    layers: Vec<LayerSpec>,
}

/// Per-layer parameter gradients, aligned with the stack's layers.
#[derive(Debug, Clone)]
pub struct StackGrads(pub Vec<LayerGrads>);

impl StackGrads {
    pub fn accumulate(&mut self, other: &StackGrads) {
        assert_eq!(self.0.len(), other.0.len());
        for (a, b) in self.0.iter_mut().zip(&other.0) {
            a.accumulate(b);
        }
    }
}

impl LayerStack {
    pub fn new(layers: Vec<LayerSpec>) -> Self {
        Self { layers }
    }

    pub fn layers(&self) -> &[LayerSpec] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [LayerSpec] {
        &mut self.layers
    }

    /// Validates every layer and the shape chain; returns the output length.
    pub fn validate(&self, in_len: usize) -> Result<usize> {
        let mut len = in_len;
        for (idx, layer) in self.layers.iter().enumerate() {
            layer.validate().map_err(|e| {
                Error::dimension(format!("layer {idx} ({}): {e}", layer.kind_name()))
            })?;
            len = layer.out_len(len).map_err(|e| {
                Error::dimension(format!("layer {idx} ({}): {e}", layer.kind_name()))
            })?;
        }
        Ok(len)
    }

    pub fn forward(&self, input: &[f64], class: Option<usize>) -> Vec<f64> {
        let mut cur = input.to_vec();
        for layer in &self.layers {
            cur = layer.forward(&cur, class);
        }
        cur
    }

    /// Forward keeping every intermediate activation; `trace[i]` is the input
    /// of layer `i`, `trace[L]` the final output.
    pub fn forward_trace(&self, input: &[f64], class: Option<usize>) -> Vec<Vec<f64>> {
        let mut trace = Vec::with_capacity(self.layers.len() + 1);
        trace.push(input.to_vec());
        for layer in &self.layers {
            let next = layer.forward(trace.last().expect("nonempty"), class);
            trace.push(next);
        }
        trace
    }

    /// Reverse pass from a precomputed trace.
    pub fn backward_from_trace(
        &self,
        trace: &[Vec<f64>],
        class: Option<usize>,
        d_out: &[f64],
    ) -> (Vec<f64>, StackGrads) {
        let mut grads = vec![LayerGrads::None; self.layers.len()];
        let mut d = d_out.to_vec();
        for (idx, layer) in self.layers.iter().enumerate().rev() {
            let (d_in, g) = layer.backward(&trace[idx], class, &d);
            grads[idx] = g;
            d = d_in;
        }
        (d, StackGrads(grads))
    }

    /// Gradient of a scalar loss with output-gradient `d_out`, with respect
    /// to the stack input and all parameters.
    pub fn backward(
        &self,
        input: &[f64],
        class: Option<usize>,
        d_out: &[f64],
    ) -> (Vec<f64>, StackGrads) {
        let trace = self.forward_trace(input, class);
        self.backward_from_trace(&trace, class, d_out)
    }

    /// Trainable parameter tensors in canonical (layer, slot) order.
    pub fn trainable_params_mut(&mut self) -> Vec<&mut Tensor> {
        self.layers
            .iter_mut()
            .flat_map(|l| l.trainable_params_mut())
            .collect()
    }

    /// Gradient tensors matching [`Self::trainable_params_mut`] order.
    pub fn grad_tensors<'a>(grads: &'a StackGrads) -> Vec<&'a Tensor> {
        grads.0.iter().flat_map(|g| g.tensors()).collect()
    }
}

/// Max relative error between analytic input-gradients and central finite
/// differences of the scalar probe `sum(weights .* output)`.
///
/// This is the stack-level verification harness; it exercises backward purely
/// through forward evaluations, so it stays independent of the code under
/// test.
pub fn finite_diff_input_check(
    stack: &LayerStack,
    input: &[f64],
    class: Option<usize>,
    probe: &[f64],
    step: f64,
) -> Result<f64> {
    if step <= 0.0 {
        return Err(Error::parameter(format!("step must be > 0, got {step}")));
    }
    let (analytic, _) = stack.backward(input, class, probe);
    let mut worst = 0.0f64;
    let mut x = input.to_vec();
    for j in 0..x.len() {
        let orig = x[j];
        x[j] = orig + step;
        let up: f64 = dot(&stack.forward(&x, class), probe);
        x[j] = orig - step;
        let down: f64 = dot(&stack.forward(&x, class), probe);
        x[j] = orig;
        let fd = (up - down) / (2.0 * step);
        let rel = (analytic[j] - fd).abs() / fd.abs().max(1e-12);
        worst = worst.max(rel);
    }
    Ok(worst)
}

/// Same check over every trainable parameter scalar.
pub fn finite_diff_weight_check(
    stack: &LayerStack,
    input: &[f64],
    class: Option<usize>,
    probe: &[f64],
    step: f64,
) -> Result<f64> {
    if step <= 0.0 {
        return Err(Error::parameter(format!("step must be > 0, got {step}")));
    }
    let (_, grads) = stack.backward(input, class, probe);
    let grad_flat: Vec<f64> = LayerStack::grad_tensors(&grads)
        .iter()
        .flat_map(|t| t.data().to_vec())
        .collect();

    let mut worst = 0.0f64;
    let mut scratch = stack.clone();
    let mut flat_idx = 0usize;
    let n_params = scratch
        .trainable_params_mut()
        .iter()
        .map(|t| t.len())
        .sum::<usize>();
    assert_eq!(n_params, grad_flat.len());

    let n_tensors = scratch.trainable_params_mut().len();
    for ti in 0..n_tensors {
        let len = scratch.trainable_params_mut()[ti].len();
        for k in 0..len {
            let orig = scratch.trainable_params_mut()[ti].data()[k];
            scratch.trainable_params_mut()[ti].data_mut()[k] = orig + step;
            let up = dot(&scratch.forward(input, class), probe);
            scratch.trainable_params_mut()[ti].data_mut()[k] = orig - step;
            let down = dot(&scratch.forward(input, class), probe);
            scratch.trainable_params_mut()[ti].data_mut()[k] = orig;
            let fd = (up - down) / (2.0 * step);
            let rel = (grad_flat[flat_idx] - fd).abs() / fd.abs().max(1e-12);
            worst = worst.max(rel);
            flat_idx += 1;
        }
    }
    Ok(worst)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
