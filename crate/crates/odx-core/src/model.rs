//! Generator and discriminator models over the layer runtime.
//!
//! A generator maps a latent vector (plus an optional class) to an image in
//! [0, 1]: the layer stack must end in `tanh`, and the model applies the
//! fixed affine output map (x+1)/2 afterwards. Models are immutable after
//! construction; forward and backward are pure functions, so evaluations are
//! reentrant and safe to share across threads.

use crate::error::{Error, Result};
use crate::layer::LayerSpec;
use crate::prior::PriorKind;
use crate::stack::{LayerStack, StackGrads};
use crate::tensor::Tensor;

#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorModel {
    stack: LayerStack,
    latent_dim: usize,
    prior: PriorKind,
    class_count: Option<usize>,
    output_shape: (usize, usize, usize),
    dataset: Option<String>,
}

impl GeneratorModel {
    pub fn new(
        layers: Vec<LayerSpec>,
        latent_dim: usize,
        prior: PriorKind,
        class_count: Option<usize>,
        output_shape: (usize, usize, usize),
    ) -> Result<Self> {
        if latent_dim == 0 {
            return Err(Error::parameter("latent_dim must be >= 1".to_string()));
        }
        if let Some(c) = class_count {
            if c == 0 {
                return Err(Error::parameter("class_count must be >= 1".to_string()));
            }
            match layers.first() {
                Some(LayerSpec::ConcatOnehot { class_count: lc }) if *lc == c => {}
                _ => {
                    return Err(Error::configuration(
                        "a conditional generator must start with a concat_onehot layer matching class_count"
                            .to_string(),
                    ))
                }
            }
        } else if matches!(layers.first(), Some(LayerSpec::ConcatOnehot { .. })) {
            return Err(Error::configuration(
                "concat_onehot requires class_count on the model".to_string(),
            ));
        }
        match layers.last() {
            Some(LayerSpec::Tanh) => {}
            _ => {
                return Err(Error::configuration(
                    "generator stacks must end in tanh so the output map lands in [0, 1]"
                        .to_string(),
                ))
            }
        }
        let stack = LayerStack::new(layers);
        let out_len = stack.validate(latent_dim)?;
        let want = output_shape.0 * output_shape.1 * output_shape.2;
        if out_len != want {
            return Err(Error::dimension(format!(
                "stack produces {out_len} values but output_shape {output_shape:?} needs {want}"
            )));
        }
        Ok(Self {
            stack,
            latent_dim,
            prior,
            class_count,
            output_shape,
            dataset: None,
        })
    }

    pub fn with_dataset(mut self, name: impl Into<String>) -> Self {
        self.dataset = Some(name.into());
        self
    }

    pub fn layers(&self) -> &[LayerSpec] {
        self.stack.layers()
    }

    pub fn latent_dim(&self) -> usize {
        self.latent_dim
    }

    pub fn prior(&self) -> PriorKind {
        self.prior
    }

    pub fn class_count(&self) -> Option<usize> {
        self.class_count
    }

    pub fn is_conditional(&self) -> bool {
        self.class_count.is_some()
    }

    pub fn output_shape(&self) -> (usize, usize, usize) {
        self.output_shape
    }

    pub fn output_len(&self) -> usize {
        self.output_shape.0 * self.output_shape.1 * self.output_shape.2
    }

    pub fn dataset(&self) -> Option<&str> {
        self.dataset.as_deref()
    }

    fn check_inputs(&self, z: &Tensor, class: Option<usize>) -> Result<()> {
        if z.shape() != [self.latent_dim] {
            return Err(Error::dimension(format!(
                "latent vector has shape {:?}, model expects [{}]",
                z.shape(),
                self.latent_dim
            )));
        }
        match (self.class_count, class) {
            (Some(c), Some(y)) if y < c => Ok(()),
            (Some(c), Some(y)) => Err(Error::conditioning(format!(
                "class {y} out of range for {c} classes"
            ))),
            (Some(_), None) => Err(Error::conditioning(
                "conditional model requires a class index".to_string(),
            )),
            (None, Some(_)) => Err(Error::conditioning(
                "unconditional model does not accept a class index".to_string(),
            )),
            (None, None) => Ok(()),
        }
    }

    /// Generates the image for latent `z` (and class `y` when conditional).
    pub fn forward(&self, z: &Tensor, class: Option<usize>) -> Result<Tensor> {
        self.check_inputs(z, class)?;
        let raw = self.stack.forward(z.data(), class);
        let mapped: Vec<f64> = raw.iter().map(|&t| (t + 1.0) / 2.0).collect();
        let (c, h, w) = self.output_shape;
        let out = Tensor::new(vec![c, h, w], mapped)?;
        out.check_finite("generator forward")?;
        Ok(out)
    }

    /// Vector-Jacobian product d_out^T (dG/dz); length equals `latent_dim`.
    /// The class conditioning channel receives no gradient.
    pub fn backward_input(
        &self,
        z: &Tensor,
        class: Option<usize>,
        d_out: &Tensor,
    ) -> Result<Tensor> {
        self.check_inputs(z, class)?;
        self.check_d_out(d_out)?;
        // output map (x+1)/2 folds a factor of 0.5 into the chain
        let d_mapped: Vec<f64> = d_out.data().iter().map(|&g| g * 0.5).collect();
        let (d_z, _) = self.stack.backward(z.data(), class, &d_mapped);
        Tensor::from_flat(d_z)
    }

    /// Forward pass that also returns the gradient in one sweep; used by the
    /// optimizer loop so each iteration costs one trace.
    pub(crate) fn forward_with_input_grad(
        &self,
        z: &Tensor,
        class: Option<usize>,
        d_out_of_image: impl FnOnce(&[f64]) -> Vec<f64>,
    ) -> Result<(Tensor, Tensor)> {
        self.check_inputs(z, class)?;
        let trace = self.stack.forward_trace(z.data(), class);
        let mapped: Vec<f64> = trace
            .last()
            .expect("trace nonempty")
            .iter()
            .map(|&t| (t + 1.0) / 2.0)
            .collect();
        let d_image = d_out_of_image(&mapped);
        let d_mapped: Vec<f64> = d_image.iter().map(|&g| g * 0.5).collect();
        let (d_z, _) = self.stack.backward_from_trace(&trace, class, &d_mapped);
        let (c, h, w) = self.output_shape;
        Ok((
            Tensor::new(vec![c, h, w], mapped)?,
            Tensor::from_flat(d_z)?,
        ))
    }

    /// Per-weight gradients of the scalar loss whose image-space gradients
    /// are `d_outs`, summed over the batch.
    pub fn backward_weights(
        &self,
        batch: &[(Tensor, Option<usize>)],
        d_outs: &[Tensor],
    ) -> Result<StackGrads> {
        if batch.len() != d_outs.len() {
            return Err(Error::dimension(format!(
                "batch of {} inputs vs {} output gradients",
                batch.len(),
                d_outs.len()
            )));
        }
        let mut total: Option<StackGrads> = None;
        for ((z, class), d_out) in batch.iter().zip(d_outs) {
            self.check_inputs(z, *class)?;
            self.check_d_out(d_out)?;
            let d_mapped: Vec<f64> = d_out.data().iter().map(|&g| g * 0.5).collect();
            let (_, grads) = self.stack.backward(z.data(), *class, &d_mapped);
            match &mut total {
                None => total = Some(grads),
                Some(t) => t.accumulate(&grads),
            }
        }
        total.ok_or_else(|| Error::parameter("backward_weights over an empty batch".to_string()))
    }

    fn check_d_out(&self, d_out: &Tensor) -> Result<()> {
        let (c, h, w) = self.output_shape;
        if d_out.shape() != [c, h, w] {
            return Err(Error::dimension(format!(
                "output gradient has shape {:?}, model produces [{c}, {h}, {w}]",
                d_out.shape()
            )));
        }
        Ok(())
    }

    /// Max relative error of `backward_input` against central differences of
    /// the probe loss `sum(output)` at the given step.
    pub fn finite_diff_check(&self, z: &Tensor, class: Option<usize>, step: f64) -> Result<f64> {
        if step <= 0.0 {
            return Err(Error::parameter(format!("step must be > 0, got {step}")));
        }
        self.check_inputs(z, class)?;
        let probe = Tensor::filled(
            vec![self.output_shape.0, self.output_shape.1, self.output_shape.2],
            1.0,
        );
        let analytic = self.backward_input(z, class, &probe)?;
        let mut worst = 0.0f64;
        let mut x = z.clone();
        for j in 0..x.len() {
            let orig = x.data()[j];
            x.data_mut()[j] = orig + step;
            let up: f64 = self.forward(&x, class)?.data().iter().sum();
            x.data_mut()[j] = orig - step;
            let down: f64 = self.forward(&x, class)?.data().iter().sum();
            x.data_mut()[j] = orig;
            let fd = (up - down) / (2.0 * step);
            let rel = (analytic.data()[j] - fd).abs() / fd.abs().max(1e-12);
            worst = worst.max(rel);
        }
        Ok(worst)
    }

    pub(crate) fn stack(&self) -> &LayerStack {
        &self.stack
    }

    pub(crate) fn stack_mut(&mut self) -> &mut LayerStack {
        &mut self.stack
    }

    /// Rounds every parameter through f32, the container's storage width, so
    /// persisted models evaluate identically to the in-memory ones.
    pub fn quantize_params_to_f32(&mut self) {
        for t in self.stack.trainable_params_mut() {
            for v in t.data_mut() {
                *v = *v as f32 as f64;
            }
        }
    }
}

/// Discriminator output: source probability plus optional class distribution.
#[derive(Debug, Clone)]
pub struct DiscOutput {
    /// Probability the input is real, in [0, 1].
    pub source: f64,
    /// Class distribution (sums to 1) for auxiliary-classifier models.
    pub class_probs: Option<Vec<f64>>,
}

/// Raw head outputs before the sigmoid/softmax squashing; training works at
/// this level for numerical stability.
#[derive(Debug, Clone)]
pub(crate) struct DiscLogits {
    pub source: f64,
    pub class: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiscriminatorModel {
    trunk: LayerStack,
    source_head: LayerSpec,
    class_head: Option<LayerSpec>,
    input_len: usize,
}

/// Weight gradients for a discriminator: trunk plus head layers.
#[derive(Debug, Clone)]
pub struct DiscGrads {
    pub trunk: StackGrads,
    pub source_head: crate::layer::LayerGrads,
    pub class_head: Option<crate::layer::LayerGrads>,
}

impl DiscGrads {
    pub fn accumulate(&mut self, other: &DiscGrads) {
        self.trunk.accumulate(&other.trunk);
        self.source_head.accumulate(&other.source_head);
        match (&mut self.class_head, &other.class_head) {
            (Some(a), Some(b)) => a.accumulate(b),
            (None, None) => {}
            _ => panic!("accumulating mismatched discriminator gradients"),
        }
    }
}

impl DiscriminatorModel {
    pub fn new(
        trunk: Vec<LayerSpec>,
        source_head: LayerSpec,
        class_head: Option<LayerSpec>,
        input_len: usize,
    ) -> Result<Self> {
        let trunk = LayerStack::new(trunk);
        let feat = trunk.validate(input_len)?;
        match &source_head {
            LayerSpec::Dense { weight, .. } if weight.shape() == [1, feat] => {}
            LayerSpec::Dense { weight, .. } => {
                return Err(Error::dimension(format!(
                    "source head must be dense [1, {feat}], got {:?}",
                    weight.shape()
                )))
            }
            _ => {
                return Err(Error::configuration(
                    "source head must be a dense layer".to_string(),
                ))
            }
        }
        if let Some(head) = &class_head {
            match head {
                LayerSpec::Dense { weight, .. } if weight.shape()[1] == feat => {}
                _ => {
                    return Err(Error::configuration(format!(
                        "class head must be a dense layer over {feat} features"
                    )))
                }
            }
        }
        Ok(Self {
            trunk,
            source_head,
            class_head,
            input_len,
        })
    }

    pub fn input_len(&self) -> usize {
        self.input_len
    }

    pub fn class_count(&self) -> Option<usize> {
        self.class_head.as_ref().map(|h| match h {
            LayerSpec::Dense { weight, .. } => weight.shape()[0],
            _ => unreachable!("validated at construction"),
        })
    }

    pub fn trunk_layers(&self) -> &[LayerSpec] {
        self.trunk.layers()
    }

    pub fn source_head(&self) -> &LayerSpec {
        &self.source_head
    }

    pub fn class_head(&self) -> Option<&LayerSpec> {
        self.class_head.as_ref()
    }

    fn check_input(&self, x: &Tensor) -> Result<()> {
        if x.len() != self.input_len {
            return Err(Error::dimension(format!(
                "discriminator expects {} inputs, got {}",
                self.input_len,
                x.len()
            )));
        }
        Ok(())
    }

    pub(crate) fn logits(&self, x: &Tensor) -> Result<DiscLogits> {
        self.check_input(x)?;
        let feat = self.trunk.forward(x.data(), None);
        let source = self.source_head.forward(&feat, None)[0];
        let class = self.class_head.as_ref().map(|h| h.forward(&feat, None));
        Ok(DiscLogits { source, class })
    }

    /// Full forward: source probability and normalized class distribution.
    pub fn forward(&self, x: &Tensor) -> Result<DiscOutput> {
        let logits = self.logits(x)?;
        Ok(DiscOutput {
            source: stable_sigmoid(logits.source),
            class_probs: logits.class.map(|l| softmax(&l)),
        })
    }

    /// Reverse pass from gradients at the squashed outputs (source
    /// probability and class probabilities); returns input gradients plus
    /// weight gradients.
    pub fn backward(
        &self,
        x: &Tensor,
        d_source: f64,
        d_class: Option<&[f64]>,
    ) -> Result<(Tensor, DiscGrads)> {
        let logits = self.logits(x)?;
        // chain through sigmoid: dL/ds_logit = dL/dp * p(1-p)
        let p = stable_sigmoid(logits.source);
        let d_source_logit = d_source * p * (1.0 - p);
        // chain through softmax: dL/dl = J_softmax^T dL/dprobs
        let d_class_logits = match (&logits.class, d_class) {
            (Some(l), Some(d)) => {
                let probs = softmax(l);
                if d.len() != probs.len() {
                    return Err(Error::dimension(
                        "class gradient width mismatch".to_string(),
                    ));
                }
                let inner: f64 = probs.iter().zip(d).map(|(p, g)| p * g).sum();
                Some(
                    probs
                        .iter()
                        .zip(d)
                        .map(|(p, g)| p * (g - inner))
                        .collect::<Vec<f64>>(),
                )
            }
            (None, Some(_)) => {
                return Err(Error::configuration(
                    "class gradient supplied but model has no class head".to_string(),
                ))
            }
            (_, None) => None,
        };
        self.backward_from_logit_grads(x, d_source_logit, d_class_logits.as_deref())
    }

    /// Reverse pass from gradients at the raw head logits; the numerically
    /// stable entry used by training losses.
    pub(crate) fn backward_from_logit_grads(
        &self,
        x: &Tensor,
        d_source_logit: f64,
        d_class_logits: Option<&[f64]>,
    ) -> Result<(Tensor, DiscGrads)> {
        self.check_input(x)?;
        let trace = self.trunk.forward_trace(x.data(), None);
        let feat = trace.last().expect("trace nonempty");

        let (mut d_feat, source_grads) =
            self.source_head.backward(feat, None, &[d_source_logit]);
        let class_grads = match (&self.class_head, d_class_logits) {
            (Some(head), Some(d)) => {
                let (d_feat_c, g) = head.backward(feat, None, d);
                for (a, b) in d_feat.iter_mut().zip(&d_feat_c) {
                    *a += b;
                }
                Some(g)
            }
            (Some(head), None) => {
                // heads without upstream gradient contribute zeros
                let zeros = vec![0.0; head.out_len(feat.len())?];
                let (_, g) = head.backward(feat, None, &zeros);
                Some(g)
            }
            (None, Some(_)) => {
                return Err(Error::configuration(
                    "class gradient supplied but model has no class head".to_string(),
                ))
            }
            (None, None) => None,
        };

        let (d_input, trunk_grads) = self.trunk.backward_from_trace(&trace, None, &d_feat);
        Ok((
            Tensor::from_flat(d_input)?,
            DiscGrads {
                trunk: trunk_grads,
                source_head: source_grads,
                class_head: class_grads,
            },
        ))
    }

    /// Batch weight gradients from per-sample output-space gradients
    /// (d source probability, d class probabilities); summed over the batch.
    pub fn backward_weights(
        &self,
        inputs: &[Tensor],
        d_outs: &[(f64, Option<Vec<f64>>)],
    ) -> Result<DiscGrads> {
        if inputs.len() != d_outs.len() {
            return Err(Error::dimension(format!(
                "batch of {} inputs vs {} output gradients",
                inputs.len(),
                d_outs.len()
            )));
        }
        let mut total: Option<DiscGrads> = None;
        for (x, (ds, dc)) in inputs.iter().zip(d_outs) {
            let (_, grads) = self.backward(x, *ds, dc.as_deref())?;
            match &mut total {
                None => total = Some(grads),
                Some(t) => t.accumulate(&grads),
            }
        }
        total.ok_or_else(|| Error::parameter("backward_weights over an empty batch".to_string()))
    }

    /// All trainable parameters: trunk, then source head, then class head.
    pub fn trainable_params_mut(&mut self) -> Vec<&mut Tensor> {
        let mut params = self.trunk.trainable_params_mut();
        params.extend(self.source_head.trainable_params_mut());
        if let Some(h) = self.class_head.as_mut() {
            params.extend(h.trainable_params_mut());
        }
        params
    }

    /// Gradient tensors aligned with [`Self::trainable_params_mut`].
    pub fn grad_tensors<'a>(grads: &'a DiscGrads) -> Vec<&'a Tensor> {
        let mut out = LayerStack::grad_tensors(&grads.trunk);
        out.extend(grads.source_head.tensors());
        if let Some(g) = &grads.class_head {
            out.extend(g.tensors());
        }
        out
    }

    pub fn quantize_params_to_f32(&mut self) {
        for t in self.trainable_params_mut() {
            for v in t.data_mut() {
                *v = *v as f32 as f64;
            }
        }
    }
}

pub(crate) fn stable_sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub(crate) fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&l| (l - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}
