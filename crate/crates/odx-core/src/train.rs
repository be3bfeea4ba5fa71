//! Desk-scale adversarial training of MLP generator/discriminator pairs on
//! synthetic datasets with controllable pixel diversity.
//!
//! The discriminator step maximizes log D(x) + log(1 - D(G(z))) (implemented
//! as the equivalent softplus losses on logits); the generator step uses the
//! standard non-saturating surrogate, maximizing log D(G(z)). The auxiliary-
//! classifier variant adds the class terms on both sides: the discriminator
//! maximizes L_class + L_source and the generator L_class - L_source with the
//! source term taken non-saturating.
//!
//! Every run is seeded end to end (initialization, batch order, latent
//! draws), so identical configs reproduce identical models bit for bit.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::layer::LayerSpec;
use crate::model::{softmax, stable_sigmoid, DiscGrads, DiscriminatorModel, GeneratorModel};
use crate::optim::{Adam, AdamParams};
use crate::prior::PriorKind;
use crate::stack::{LayerStack, StackGrads};
use crate::tensor::Tensor;

/// Loss ceiling: anything above this aborts the run as divergence.
const DIVERGENCE_LIMIT: f64 = 1e6;

/// Flat images draw from four low-contrast grays near mid-range; the class
/// is the palette index.
pub const FLAT_PALETTE: [f64; 4] = [0.37, 0.45, 0.55, 0.63];

/// Stripe colors come from eight grays spanning most of the range; bars pair
/// one dark with one light value, and the class is the orientation.
pub const STRIPE_PALETTE: [f64; 8] = [0.10, 0.22, 0.34, 0.44, 0.56, 0.66, 0.78, 0.90];

/// Texture pixels quantize to this many uniform levels.
pub const TEXTURE_LEVELS: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ToyKind {
    Flat,
    Stripes,
    Texture,
}

impl ToyKind {
    pub fn name(&self) -> &'static str {
        match self {
            ToyKind::Flat => "flat",
            ToyKind::Stripes => "stripes",
            ToyKind::Texture => "texture",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "flat" => Ok(ToyKind::Flat),
            "stripes" => Ok(ToyKind::Stripes),
            "texture" => Ok(ToyKind::Texture),
            other => Err(Error::parameter(format!(
                "unknown toy dataset {other:?}: expected flat, stripes or texture"
            ))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ToyDataset {
    pub name: String,
    pub images: Vec<Tensor>,
    pub labels: Option<Vec<usize>>,
    pub class_count: Option<usize>,
}

impl ToyDataset {
    pub fn shape(&self) -> (usize, usize, usize) {
        let s = self.images[0].shape();
        (s[0], s[1], s[2])
    }

    /// Per-channel (min, max) over every image.
    pub fn channel_range(&self) -> Vec<(f64, f64)> {
        let (c, h, w) = self.shape();
        let plane = h * w;
        let mut ranges = vec![(f64::INFINITY, f64::NEG_INFINITY); c];
        for img in &self.images {
            for ch in 0..c {
                for &v in &img.data()[ch * plane..(ch + 1) * plane] {
                    ranges[ch].0 = ranges[ch].0.min(v);
                    ranges[ch].1 = ranges[ch].1.max(v);
                }
            }
        }
        ranges
    }

    /// Mean image over the dataset.
    pub fn mean_image(&self) -> Tensor {
        let mut acc = vec![0.0; self.images[0].len()];
        for img in &self.images {
            for (a, v) in acc.iter_mut().zip(img.data()) {
                *a += v;
            }
        }
        let n = self.images.len() as f64;
        for a in acc.iter_mut() {
            *a /= n;
        }
        Tensor::new(self.images[0].shape().to_vec(), acc).expect("mean stays finite")
    }

    /// Mean image restricted to one class.
    pub fn class_mean_image(&self, class: usize) -> Option<Tensor> {
        let labels = self.labels.as_ref()?;
        let mut acc = vec![0.0; self.images[0].len()];
        let mut count = 0usize;
        for (img, &label) in self.images.iter().zip(labels) {
            if label == class {
                for (a, v) in acc.iter_mut().zip(img.data()) {
                    *a += v;
                }
                count += 1;
            }
        }
        if count == 0 {
            return None;
        }
        for a in acc.iter_mut() {
            *a /= count as f64;
        }
        Some(Tensor::new(self.images[0].shape().to_vec(), acc).expect("mean stays finite"))
    }
}

/// Deterministically builds a synthetic dataset of the requested kind.
pub fn make_toy_dataset(
    kind: ToyKind,
    count: usize,
    shape: (usize, usize, usize),
    seed: u64,
) -> Result<ToyDataset> {
    if count == 0 {
        return Err(Error::parameter("dataset count must be >= 1".to_string()));
    }
    let (c, h, w) = shape;
    if c == 0 || h == 0 || w == 0 {
        return Err(Error::dimension(format!(
            "image shape {shape:?} must be positive"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let plane = h * w;
    let mut images = Vec::with_capacity(count);
    let mut labels = Vec::with_capacity(count);

    for i in 0..count {
        let mut data = vec![0.0; c * plane];
        let label = match kind {
            ToyKind::Flat => {
                let color = i % FLAT_PALETTE.len();
                data.fill(FLAT_PALETTE[color]);
                color
            }
            ToyKind::Stripes => {
                // cycle through all dark/light pairs; orientation flips each
                // full sweep of the pairs and is the class label
                let pair = i % 16;
                let dark = STRIPE_PALETTE[pair / 4];
                let light = STRIPE_PALETTE[4 + pair % 4];
                let vertical = (i / 16) % 2 == 1;
                for ch in 0..c {
                    for row in 0..h {
                        for col in 0..w {
                            let band = if vertical { col / 2 } else { row / 2 };
                            data[ch * plane + row * w + col] =
                                if band % 2 == 0 { dark } else { light };
                        }
                    }
                }
                usize::from(vertical)
            }
            ToyKind::Texture => {
                // each class draws from its own quartile of the level range,
                // so the pooled histogram still covers every level
                let class = i % 4;
                let band = TEXTURE_LEVELS / 4;
                for v in data.iter_mut() {
                    let level = class * band + rng.gen_range(0..band);
                    *v = (level as f64 + 0.5) / TEXTURE_LEVELS as f64;
                }
                class
            }
        };
        images.push(Tensor::new(vec![c, h, w], data)?);
        labels.push(label);
    }

    let class_count = match kind {
        ToyKind::Flat => FLAT_PALETTE.len(),
        ToyKind::Stripes => 2,
        ToyKind::Texture => 4,
    };
    Ok(ToyDataset {
        name: kind.name().to_string(),
        images,
        labels: Some(labels),
        class_count: Some(class_count),
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainConfig {
    pub iterations: usize,
    pub batch_size: usize,
    pub g_lr: f64,
    pub d_lr: f64,
    pub latent_dim: usize,
    pub prior: PriorKind,
    pub seed: u64,
    /// Present for auxiliary-classifier training.
    pub class_count: Option<usize>,
}

impl TrainConfig {
    /// Defaults that reach a usable equilibrium on the toy datasets; the
    /// discriminator trains a little faster than the generator, which keeps
    /// generated pixels pinned to the data range.
    pub fn new(latent_dim: usize, prior: PriorKind) -> Self {
        TrainConfig {
            iterations: 3000,
            batch_size: 32,
            g_lr: 2e-4,
            d_lr: 4e-4,
            latent_dim,
            prior,
            seed: 0,
            class_count: None,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_iterations(mut self, iterations: usize) -> Self {
        self.iterations = iterations;
        self
    }

    fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::parameter("batch_size must be >= 1".to_string()));
        }
        if self.latent_dim == 0 {
            return Err(Error::parameter("latent_dim must be >= 1".to_string()));
        }
        if !(self.g_lr > 0.0) || !(self.d_lr > 0.0) {
            return Err(Error::parameter("learning rates must be > 0".to_string()));
        }
        Ok(())
    }
}

/// One line of the training log.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainRecord {
    pub iteration: usize,
    pub l_d: f64,
    pub l_g: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub l_source: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub l_class: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct TrainOutput {
    pub generator: GeneratorModel,
    pub discriminator: DiscriminatorModel,
    pub log: Vec<TrainRecord>,
}

fn xavier_tensor(rng: &mut ChaCha8Rng, shape: Vec<usize>, fan_in: usize, fan_out: usize) -> Tensor {
    let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
    let n: usize = shape.iter().product();
    // keep weights on the f32 grid so containers round-trip exactly
    let data: Vec<f64> = (0..n)
        .map(|_| (rng.gen_range(-limit..limit) as f32) as f64)
        .collect();
    Tensor::new(shape, data).expect("finite init")
}

fn dense(rng: &mut ChaCha8Rng, out_w: usize, in_w: usize) -> LayerSpec {
    LayerSpec::Dense {
        weight: xavier_tensor(rng, vec![out_w, in_w], in_w, out_w),
        bias: Tensor::zeros(vec![out_w]),
    }
}

/// Hidden widths scale with the image size; fixed ratios keep toy runs fast.
fn hidden_widths(out_len: usize) -> (usize, usize) {
    let h2 = (out_len / 2).clamp(32, 256);
    let h1 = (out_len / 4).clamp(16, 128);
    (h1, h2)
}

/// Seeded initial generator/discriminator pair for a dataset shape. Training
/// with zero iterations returns exactly these models.
pub fn init_models(
    shape: (usize, usize, usize),
    cfg: &TrainConfig,
) -> Result<(GeneratorModel, DiscriminatorModel)> {
    cfg.validate()?;
    let (c, h, w) = shape;
    let out_len = c * h * w;
    let (h1, h2) = hidden_widths(out_len);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    // generator draws, then discriminator draws, from one seeded stream
    let g_in = cfg.latent_dim + cfg.class_count.unwrap_or(0);
    let mut layers = Vec::new();
    if let Some(classes) = cfg.class_count {
        layers.push(LayerSpec::ConcatOnehot {
            class_count: classes,
        });
    }
    layers.push(dense(&mut rng, h1, g_in));
    layers.push(LayerSpec::Relu);
    layers.push(dense(&mut rng, h2, h1));
    layers.push(LayerSpec::Relu);
    layers.push(dense(&mut rng, out_len, h2));
    layers.push(LayerSpec::Tanh);
    let generator = GeneratorModel::new(
        layers,
        cfg.latent_dim,
        cfg.prior,
        cfg.class_count,
        shape,
    )?;

    let trunk = vec![
        dense(&mut rng, h2, out_len),
        LayerSpec::Relu,
        dense(&mut rng, h1, h2),
        LayerSpec::Relu,
    ];
    let source_head = dense(&mut rng, 1, h1);
    let class_head = cfg.class_count.map(|classes| dense(&mut rng, classes, h1));
    let discriminator = DiscriminatorModel::new(trunk, source_head, class_head, out_len)?;

    Ok((generator, discriminator))
}

/// Adversarial training on the plain objective.
pub fn train_gan(dataset: &ToyDataset, cfg: &TrainConfig) -> Result<TrainOutput> {
    if cfg.class_count.is_some() {
        return Err(Error::configuration(
            "plain adversarial training does not take class_count; use the auxiliary-classifier trainer"
                .to_string(),
        ));
    }
    train_impl(dataset, cfg)
}

/// Auxiliary-classifier training; the dataset must carry labels.
pub fn train_acgan(dataset: &ToyDataset, cfg: &TrainConfig) -> Result<TrainOutput> {
    let classes = cfg.class_count.ok_or_else(|| {
        Error::configuration("auxiliary-classifier training requires class_count".to_string())
    })?;
    let labels = dataset.labels.as_ref().ok_or_else(|| {
        Error::configuration("auxiliary-classifier training requires a labeled dataset".to_string())
    })?;
    if dataset.class_count != Some(classes) {
        return Err(Error::configuration(format!(
            "dataset declares {:?} classes, config says {classes}",
            dataset.class_count
        )));
    }
    if let Some(&bad) = labels.iter().find(|&&l| l >= classes) {
        return Err(Error::configuration(format!(
            "label {bad} out of range for {classes} classes"
        )));
    }
    train_impl(dataset, cfg)
}

struct ModelOptimizer {
    states: Vec<Adam>,
}

impl ModelOptimizer {
    fn for_params(params: &[&mut Tensor]) -> Self {
        let adam = AdamParams {
            beta1: 0.5,
            beta2: 0.999,
            epsilon: 1e-8,
        };
        ModelOptimizer {
            states: params.iter().map(|t| Adam::new(t.len(), adam)).collect(),
        }
    }

    fn step(&mut self, lr: f64, params: Vec<&mut Tensor>, grads: &[&Tensor]) {
        assert_eq!(params.len(), grads.len());
        assert_eq!(params.len(), self.states.len());
        for ((state, param), grad) in self.states.iter_mut().zip(params).zip(grads) {
            state.step(lr, param.data_mut(), grad.data());
        }
    }
}

fn train_impl(dataset: &ToyDataset, cfg: &TrainConfig) -> Result<TrainOutput> {
    cfg.validate()?;
    if dataset.images.is_empty() {
        return Err(Error::parameter("training dataset is empty".to_string()));
    }
    let shape = dataset.shape();
    let (mut generator, mut discriminator) = init_models(shape, cfg)?;
    let conditional = cfg.class_count.is_some();
    let labels = dataset.labels.as_ref();

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x9E37_79B9_7F4A_7C15);
    let mut g_opt = ModelOptimizer::for_params(&generator.stack_mut().trainable_params_mut());
    let mut d_opt = ModelOptimizer::for_params(&discriminator.trainable_params_mut());

    let mut log = Vec::with_capacity(cfg.iterations);
    let batch = cfg.batch_size;
    let scale = 1.0 / batch as f64;

    for iteration in 0..cfg.iterations {
        // ---- discriminator step ----
        let mut d_grads: Option<DiscGrads> = None;
        let mut l_source = 0.0;
        let mut l_class = 0.0;
        for _ in 0..batch {
            let idx = rng.gen_range(0..dataset.images.len());
            let real = &dataset.images[idx];
            let real_label = labels.map(|l| l[idx]);

            let z = cfg.prior.sample(&mut rng, cfg.latent_dim);
            let fake_label = cfg.class_count.map(|c| rng.gen_range(0..c));
            let fake = generator.forward(&z, fake_label)?;

            // real sample: -ln sigma(s), class CE on the true label
            let logits = discriminator.logits(real)?;
            let p_real = stable_sigmoid(logits.source);
            l_source += softplus(-logits.source);
            let d_class_real = if conditional {
                let probs = softmax(logits.class.as_ref().expect("class head present"));
                let y = real_label.expect("labels validated");
                l_class += -probs[y].max(1e-300).ln();
                Some(class_ce_grad(&probs, y, scale))
            } else {
                None
            };
            let (_, g_real) = discriminator.backward_from_logit_grads(
                real,
                (p_real - 1.0) * scale,
                d_class_real.as_deref(),
            )?;
            accumulate_disc(&mut d_grads, g_real);

            // fake sample: -ln(1 - sigma(s)), class CE on the conditioning label
            let logits = discriminator.logits(&fake)?;
            let p_fake = stable_sigmoid(logits.source);
            l_source += softplus(logits.source);
            let d_class_fake = if conditional {
                let probs = softmax(logits.class.as_ref().expect("class head present"));
                let y = fake_label.expect("conditional");
                l_class += -probs[y].max(1e-300).ln();
                Some(class_ce_grad(&probs, y, scale))
            } else {
                None
            };
            let (_, g_fake) = discriminator.backward_from_logit_grads(
                &fake,
                p_fake * scale,
                d_class_fake.as_deref(),
            )?;
            accumulate_disc(&mut d_grads, g_fake);
        }
        let d_grads = d_grads.expect("batch_size >= 1");
        let l_d = (l_source + l_class) * scale;
        check_finite_loss(l_d, iteration, "discriminator")?;
        {
            let grads = DiscriminatorModel::grad_tensors(&d_grads);
            d_opt.step(cfg.d_lr, discriminator.trainable_params_mut(), &grads);
        }

        // ---- generator step (non-saturating source term) ----
        let mut g_grads: Option<StackGrads> = None;
        let mut l_g_acc = 0.0;
        for _ in 0..batch {
            let z = cfg.prior.sample(&mut rng, cfg.latent_dim);
            let y = cfg.class_count.map(|c| rng.gen_range(0..c));

            let trace = generator.stack().forward_trace(z.data(), y);
            let raw = trace.last().expect("nonempty");
            let image: Vec<f64> = raw.iter().map(|&t| (t + 1.0) / 2.0).collect();
            let image_t = Tensor::new(
                vec![shape.0, shape.1, shape.2],
                image,
            )?;

            let logits = discriminator.logits(&image_t)?;
            let p = stable_sigmoid(logits.source);
            l_g_acc += softplus(-logits.source);
            let d_class = if conditional {
                let probs = softmax(logits.class.as_ref().expect("class head present"));
                let y = y.expect("conditional");
                l_g_acc += -probs[y].max(1e-300).ln();
                Some(class_ce_grad(&probs, y, scale))
            } else {
                None
            };
            let (d_image, _) = discriminator.backward_from_logit_grads(
                &image_t,
                (p - 1.0) * scale,
                d_class.as_deref(),
            )?;

            let d_mapped: Vec<f64> = d_image.data().iter().map(|&g| g * 0.5).collect();
            let (_, grads) = generator
                .stack()
                .backward_from_trace(&trace, y, &d_mapped);
            match &mut g_grads {
                None => g_grads = Some(grads),
                Some(t) => t.accumulate(&grads),
            }
        }
        let g_grads = g_grads.expect("batch_size >= 1");
        let l_g = l_g_acc * scale;
        check_finite_loss(l_g, iteration, "generator")?;
        {
            let grads = LayerStack::grad_tensors(&g_grads);
            g_opt.step(cfg.g_lr, generator.stack_mut().trainable_params_mut(), &grads);
        }

        log.push(TrainRecord {
            iteration,
            l_d,
            l_g,
            l_source: conditional.then_some(l_source * scale),
            l_class: conditional.then_some(l_class * scale),
        });
    }

    generator.quantize_params_to_f32();
    discriminator.quantize_params_to_f32();
    let generator = generator.with_dataset(dataset.name.clone());
    Ok(TrainOutput {
        generator,
        discriminator,
        log,
    })
}

fn class_ce_grad(probs: &[f64], label: usize, scale: f64) -> Vec<f64> {
    probs
        .iter()
        .enumerate()
        .map(|(i, &p)| (p - f64::from(u8::from(i == label))) * scale)
        .collect()
}

fn accumulate_disc(total: &mut Option<DiscGrads>, grads: DiscGrads) {
    match total {
        None => *total = Some(grads),
        Some(t) => t.accumulate(&grads),
    }
}

fn check_finite_loss(loss: f64, iteration: usize, side: &str) -> Result<()> {
    if !loss.is_finite() || loss.abs() > DIVERGENCE_LIMIT {
        return Err(Error::numeric(format!(
            "{side} loss diverged at iteration {iteration}: {loss}"
        )));
    }
    Ok(())
}

fn softplus(x: f64) -> f64 {
    // ln(1 + e^x) without overflow
    if x > 30.0 {
        x
    } else if x < -30.0 {
        x.exp()
    } else {
        x.exp().ln_1p()
    }
}

/// `n` forward evaluations on fresh prior draws.
pub fn sample(
    model: &GeneratorModel,
    n: usize,
    seed: u64,
    y: Option<usize>,
) -> Result<Vec<Tensor>> {
    if n == 0 {
        return Err(Error::parameter("sample count must be >= 1".to_string()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        let z = model.prior().sample(&mut rng, model.latent_dim());
        out.push(model.forward(&z, y)?);
    }
    Ok(out)
}
