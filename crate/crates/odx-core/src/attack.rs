//! Latent search: drive a fixed generator toward an arbitrary target image
//! by gradient descent on its latent input, while a moment penalty keeps the
//! adversarial latent statistically close to the prior.
//!
//! The loss is L(target, z) = d(target, G(z[, y])) + rho(z), where rho is the
//! weighted squared deviation of the first k raw sample moments of z from the
//! prior's theoretical moments. Minimization runs Adam on grad_z L, applies
//! the configured clipping after every update, and returns the best iterate
//! encountered rather than the last one; with penalties in play the loss is
//! not monotone.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gate::sample_moment;
use crate::model::GeneratorModel;
use crate::optim::{Adam, AdamParams};
use crate::prior::PriorKind;
use crate::tensor::Tensor;

/// Floor for log arguments inside the cross-entropy distance.
const XE_LOG_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DistanceKind {
    Mse,
    Xe,
}

impl DistanceKind {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "mse" => Ok(DistanceKind::Mse),
            "xe" => Ok(DistanceKind::Xe),
            other => Err(Error::parameter(format!(
                "unknown distance {other:?}: expected mse or xe"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClippingKind {
    None,
    Hard,
    Stochastic,
}

impl ClippingKind {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(ClippingKind::None),
            "hard" => Ok(ClippingKind::Hard),
            "stochastic" => Ok(ClippingKind::Stochastic),
            other => Err(Error::parameter(format!(
                "unknown clipping {other:?}: expected none, hard or stochastic"
            ))),
        }
    }
}

/// Everything the latent search needs beyond the model and target.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AttackConfig {
    pub distance: DistanceKind,
    /// Number of penalized raw moments.
    pub k: usize,
    /// Weight per moment difference; length must equal `k`.
    pub omega: Vec<f64>,
    /// Learning rate.
    pub eta: f64,
    pub max_iters: usize,
    pub clipping: ClippingKind,
    pub seed: u64,
    pub adam: AdamParams,
    /// Iterations between trajectory samples.
    pub record_stride: usize,
}

impl AttackConfig {
    /// Paper-protocol defaults for a given prior: MSE distance, eta 0.01,
    /// k = 4 with unit weights under the normal prior, k = 6 plus hard
    /// clipping under the uniform prior.
    pub fn for_prior(prior: PriorKind) -> Self {
        let (k, clipping) = match prior {
            PriorKind::StandardNormal => (4, ClippingKind::None),
            PriorKind::UniformSym => (6, ClippingKind::Hard),
        };
        AttackConfig {
            distance: DistanceKind::Mse,
            k,
            omega: vec![1.0; k],
            eta: 0.01,
            max_iters: 2000,
            clipping,
            seed: 0,
            adam: AdamParams::default(),
            record_stride: 10,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    /// Same configuration with the penalty fully relaxed.
    pub fn relaxed(&self) -> Self {
        let mut cfg = self.clone();
        cfg.k = 0;
        cfg.omega.clear();
        cfg
    }

    pub fn validate(&self) -> Result<()> {
        if self.omega.len() != self.k {
            return Err(Error::parameter(format!(
                "omega has {} weights but k = {}",
                self.omega.len(),
                self.k
            )));
        }
        if self.omega.iter().any(|&w| w < 0.0 || !w.is_finite()) {
            return Err(Error::parameter(
                "moment weights must be finite and >= 0".to_string(),
            ));
        }
        if !(self.eta > 0.0) {
            return Err(Error::parameter(format!(
                "learning rate must be > 0, got {}",
                self.eta
            )));
        }
        if self.record_stride == 0 {
            return Err(Error::parameter("record_stride must be >= 1".to_string()));
        }
        Ok(())
    }
}

/// Outcome of one latent search.
#[derive(Debug, Clone)]
pub struct AttackResult {
    /// The adversarial latent vector (best iterate encountered).
    pub z_hat: Tensor,
    /// The generated image G(z_hat).
    pub x_hat: Tensor,
    pub best_loss: f64,
    pub distance_value: f64,
    pub penalty_value: f64,
    /// Ordered (iteration, loss) samples; always contains the best iterate.
    pub trajectory: Vec<(usize, f64)>,
    /// Class index passed through untouched for conditional attacks.
    pub y: Option<usize>,
    pub iterations_run: usize,
}

/// Mean squared error over all elements.
pub fn distance_mse(a: &Tensor, b: &Tensor) -> Result<f64> {
    a.check_same_shape(b, "distance_mse")?;
    let n = a.len() as f64;
    Ok(a.data()
        .iter()
        .zip(b.data())
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        / n)
}

/// Cross entropy between softmax-normalized tensors, flattened jointly over
/// all channels and pixels. Softmax makes the comparison shift-invariant in
/// either argument; log arguments are floored at 1e-12.
pub fn distance_xe(target: &Tensor, generated: &Tensor) -> Result<f64> {
    target.check_same_shape(generated, "distance_xe")?;
    let p = softmax_all(target.data());
    let q = softmax_all(generated.data());
    Ok(-p
        .iter()
        .zip(&q)
        .map(|(pi, qi)| pi * qi.max(XE_LOG_FLOOR).ln())
        .sum::<f64>())
}

fn softmax_all(values: &[f64]) -> Vec<f64> {
    let max = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = values.iter().map(|&v| (v - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

/// Weighted squared deviation of the first k raw sample moments from the
/// prior's theoretical moments.
pub fn moment_penalty(z: &Tensor, prior: PriorKind, k: usize, omega: &[f64]) -> Result<f64> {
    if z.is_empty() {
        return Err(Error::parameter(
            "moment penalty of an empty vector".to_string(),
        ));
    }
    if omega.len() != k {
        return Err(Error::parameter(format!(
            "omega has {} weights but k = {k}",
            omega.len()
        )));
    }
    let mut acc = 0.0;
    for i in 1..=k {
        let theoretical = prior.raw_moment(i)?;
        let sample = sample_moment(z, i)?;
        let diff = theoretical - sample;
        acc += omega[i - 1] * diff * diff;
    }
    Ok(acc)
}

/// Analytic gradient of the moment penalty:
/// d rho / d z_j = sum_i omega_i * 2 (mu~_z(i) - mu_Z(i)) * i z_j^{i-1} / n.
pub fn moment_penalty_grad(
    z: &Tensor,
    prior: PriorKind,
    k: usize,
    omega: &[f64],
) -> Result<Vec<f64>> {
    if omega.len() != k {
        return Err(Error::parameter(format!(
            "omega has {} weights but k = {k}",
            omega.len()
        )));
    }
    let n = z.len() as f64;
    let mut grad = vec![0.0; z.len()];
    for i in 1..=k {
        let theoretical = prior.raw_moment(i)?;
        let sample = sample_moment(z, i)?;
        let scale = omega[i - 1] * 2.0 * (sample - theoretical) * i as f64 / n;
        if scale == 0.0 {
            continue;
        }
        for (g, &zj) in grad.iter_mut().zip(z.data()) {
            *g += scale * zj.powi(i as i32 - 1);
        }
    }
    Ok(grad)
}

/// Full loss with its two components.
pub fn latent_loss(
    target: &Tensor,
    z: &Tensor,
    model: &GeneratorModel,
    cfg: &AttackConfig,
    y: Option<usize>,
) -> Result<(f64, f64, f64)> {
    let generated = model.forward(z, y)?;
    let distance = match cfg.distance {
        DistanceKind::Mse => distance_mse(target, &generated)?,
        DistanceKind::Xe => distance_xe(target, &generated)?,
    };
    let penalty = moment_penalty(z, model.prior(), cfg.k, &cfg.omega)?;
    Ok((distance + penalty, distance, penalty))
}

/// Elementwise clamp to [-1, 1]; idempotent.
pub fn clip_hard(z: &Tensor) -> Tensor {
    let data: Vec<f64> = z.data().iter().map(|&v| v.clamp(-1.0, 1.0)).collect();
    Tensor::new(z.shape().to_vec(), data).expect("clamp preserves shape and finiteness")
}

/// Coordinates inside [-1, 1] pass through; each coordinate outside is
/// replaced by an independent uniform draw from [-1, 1].
pub fn clip_stochastic<R: Rng + ?Sized>(z: &Tensor, rng: &mut R) -> Tensor {
    let data: Vec<f64> = z
        .data()
        .iter()
        .map(|&v| {
            if (-1.0..=1.0).contains(&v) {
                v
            } else {
                rng.gen_range(-1.0..=1.0)
            }
        })
        .collect();
    Tensor::new(z.shape().to_vec(), data).expect("replacement preserves shape")
}

fn apply_clipping(z: &Tensor, clipping: ClippingKind, rng: &mut ChaCha8Rng) -> Tensor {
    match clipping {
        ClippingKind::None => z.clone(),
        ClippingKind::Hard => clip_hard(z),
        ClippingKind::Stochastic => clip_stochastic(z, rng),
    }
}

/// Gradient of the distance term in image space.
fn distance_grad(kind: DistanceKind, target: &Tensor, generated: &[f64]) -> Vec<f64> {
    match kind {
        DistanceKind::Mse => {
            let n = target.len() as f64;
            generated
                .iter()
                .zip(target.data())
                .map(|(g, t)| 2.0 * (g - t) / n)
                .collect()
        }
        DistanceKind::Xe => {
            // d/dg of -sum p ln softmax(g) is softmax(g) - p
            let p = softmax_all(target.data());
            let q = softmax_all(generated);
            q.iter().zip(&p).map(|(qi, pi)| qi - pi).collect()
        }
    }
}

/// Runs the latent search and returns the best iterate encountered.
///
/// z_0 is sampled from the model's prior with `cfg.seed` (and clipped when
/// clipping is configured, so every reported iterate honours the bound);
/// each of the `max_iters` Adam steps descends the full loss gradient, and
/// clipping applies after every update. `max_iters == 0` evaluates and
/// returns the initial point.
pub fn search(
    model: &GeneratorModel,
    target: &Tensor,
    cfg: &AttackConfig,
    y: Option<usize>,
) -> Result<AttackResult> {
    cfg.validate()?;
    let (c, h, w) = model.output_shape();
    if target.shape() != [c, h, w] {
        return Err(Error::dimension(format!(
            "target shape {:?} does not match generator output [{c}, {h}, {w}]",
            target.shape()
        )));
    }
    // fail fast on moment orders the prior cannot supply
    moment_penalty(
        &Tensor::from_flat(vec![0.0])?,
        model.prior(),
        cfg.k,
        &cfg.omega,
    )?;

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let prior = model.prior();
    let mut z = prior.sample(&mut rng, model.latent_dim());
    z = apply_clipping(&z, cfg.clipping, &mut rng);

    let mut adam = Adam::new(model.latent_dim(), cfg.adam);

    let eval = |z: &Tensor| -> Result<(f64, f64, f64)> { latent_loss(target, z, model, cfg, y) };

    let (l0, d0, p0) = eval(&z)?;
    let mut best = BestIterate {
        z: z.clone(),
        loss: l0,
        distance: d0,
        penalty: p0,
        iteration: 0,
    };
    let mut trajectory: Vec<(usize, f64)> = vec![(0, l0)];

    for iteration in 1..=cfg.max_iters {
        // fused forward+backward for the distance term
        let (_, mut grad) = model.forward_with_input_grad(&z, y, |generated| {
            distance_grad(cfg.distance, target, generated)
        })?;
        let rho_grad = moment_penalty_grad(&z, prior, cfg.k, &cfg.omega)?;
        for (g, r) in grad.data_mut().iter_mut().zip(&rho_grad) {
            *g += r;
        }

        adam.step(cfg.eta, z.data_mut(), grad.data());
        z = apply_clipping(&z, cfg.clipping, &mut rng);
        z.check_finite("latent iterate")?;

        let (loss, distance, penalty) = eval(&z)?;
        if loss < best.loss {
            best = BestIterate {
                z: z.clone(),
                loss,
                distance,
                penalty,
                iteration,
            };
        }
        if iteration % cfg.record_stride == 0 || iteration == cfg.max_iters {
            trajectory.push((iteration, loss));
        }
    }

    // the trajectory always contains the returned minimum
    if !trajectory.iter().any(|&(i, _)| i == best.iteration) {
        let pos = trajectory
            .iter()
            .position(|&(i, _)| i > best.iteration)
            .unwrap_or(trajectory.len());
        trajectory.insert(pos, (best.iteration, best.loss));
    }

    let x_hat = model.forward(&best.z, y)?;
    Ok(AttackResult {
        z_hat: best.z,
        x_hat,
        best_loss: best.loss,
        distance_value: best.distance,
        penalty_value: best.penalty,
        trajectory,
        y,
        iterations_run: cfg.max_iters,
    })
}

struct BestIterate {
    z: Tensor,
    loss: f64,
    distance: f64,
    penalty: f64,
    iteration: usize,
}

/// Linear interpolation z(t) = (1-t) z_a + t z_b over `steps` points.
/// Endpoints are returned bitwise-equal to the inputs.
pub fn interpolate(z_a: &Tensor, z_b: &Tensor, steps: usize) -> Result<Vec<Tensor>> {
    z_a.check_same_shape(z_b, "interpolate")?;
    if steps < 2 {
        return Err(Error::parameter(format!(
            "interpolation needs at least 2 steps, got {steps}"
        )));
    }
    let mut out = Vec::with_capacity(steps);
    out.push(z_a.clone());
    for s in 1..steps - 1 {
        let t = s as f64 / (steps - 1) as f64;
        let data: Vec<f64> = z_a
            .data()
            .iter()
            .zip(z_b.data())
            .map(|(a, b)| (1.0 - t) * a + t * b)
            .collect();
        out.push(Tensor::new(z_a.shape().to_vec(), data)?);
    }
    out.push(z_b.clone());
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::layer::LayerSpec;

    fn small_model(seed: u64, latent: usize, prior: PriorKind) -> GeneratorModel {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let out = 12usize;
        let weight: Vec<f64> = (0..out * latent)
            .map(|_| (rng.gen_range(-0.6..0.6) as f32) as f64)
            .collect();
        GeneratorModel::new(
            vec![
                LayerSpec::Dense {
                    weight: Tensor::new(vec![out, latent], weight).unwrap(),
                    bias: Tensor::zeros(vec![out]),
                },
                LayerSpec::Tanh,
            ],
            latent,
            prior,
            None,
            (3, 2, 2),
        )
        .unwrap()
    }

    #[test]
    fn mse_basics() {
        let a = Tensor::zeros(vec![2, 3]);
        let b = Tensor::filled(vec![2, 3], 1.0);
        assert_eq!(distance_mse(&a, &a).unwrap(), 0.0);
        assert_eq!(distance_mse(&a, &b).unwrap(), 1.0);
        assert!(distance_mse(&a, &Tensor::zeros(vec![3, 2])).is_err());
    }

    #[test]
    fn mse_matches_elementwise_oracle() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        let a: Vec<f64> = (0..64).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let b: Vec<f64> = (0..64).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let mut acc = 0.0;
        for i in 0..64 {
            let d = a[i] - b[i];
            acc += d * d;
        }
        let oracle = acc / 64.0;
        let got = distance_mse(
            &Tensor::from_flat(a).unwrap(),
            &Tensor::from_flat(b).unwrap(),
        )
        .unwrap();
        assert!((got - oracle).abs() <= 1e-12);
    }

    #[test]
    fn xe_is_shift_invariant() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2);
        let t = Tensor::from_flat((0..30).map(|_| rng.gen_range(0.0..1.0)).collect()).unwrap();
        let g: Vec<f64> = (0..30).map(|_| rng.gen_range(0.0..1.0)).collect();
        let g_shifted: Vec<f64> = g.iter().map(|v| v + 0.37).collect();
        let base = distance_xe(&t, &Tensor::from_flat(g.clone()).unwrap()).unwrap();
        let shifted = distance_xe(&t, &Tensor::from_flat(g_shifted).unwrap()).unwrap();
        assert!((base - shifted).abs() <= 1e-9);
        // shifting the target argument too
        let t_shifted =
            Tensor::from_flat(t.data().iter().map(|v| v - 1.23).collect()).unwrap();
        let shifted_t = distance_xe(&t_shifted, &Tensor::from_flat(g).unwrap()).unwrap();
        assert!((base - shifted_t).abs() <= 1e-9);
    }

    #[test]
    fn xe_of_identical_constants_is_ln_m() {
        let m = 48usize;
        let t = Tensor::filled(vec![3, 4, 4], 0.7);
        let got = distance_xe(&t, &t).unwrap();
        assert!((got - (m as f64).ln()).abs() <= 1e-12);
    }

    #[test]
    fn xe_matches_straight_line_oracle() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let t: Vec<f64> = (0..25).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let g: Vec<f64> = (0..25).map(|_| rng.gen_range(-2.0..2.0)).collect();

        // oracle: literal softmax then -sum p ln q
        let exp_t: Vec<f64> = t.iter().map(|v| v.exp()).collect();
        let sum_t: f64 = exp_t.iter().sum();
        let exp_g: Vec<f64> = g.iter().map(|v| v.exp()).collect();
        let sum_g: f64 = exp_g.iter().sum();
        let mut oracle = 0.0;
        for i in 0..25 {
            oracle -= exp_t[i] / sum_t * (exp_g[i] / sum_g).ln();
        }

        let got = distance_xe(
            &Tensor::from_flat(t).unwrap(),
            &Tensor::from_flat(g).unwrap(),
        )
        .unwrap();
        assert!((got - oracle).abs() <= 1e-10);
    }

    #[test]
    fn moment_penalty_examples() {
        // all-zero z under the normal prior, k=2: (0-0)^2 + (1-0)^2 = 1
        let z = Tensor::zeros(vec![8]);
        let got = moment_penalty(&z, PriorKind::StandardNormal, 2, &[1.0, 1.0]).unwrap();
        assert!((got - 1.0).abs() <= 1e-15);

        // a vector matching the uniform prior's first two moments exactly
        let z = Tensor::from_flat(vec![
            (1.0f64 / 3.0).sqrt(),
            -(1.0f64 / 3.0).sqrt(),
        ])
        .unwrap();
        let got = moment_penalty(&z, PriorKind::UniformSym, 2, &[1.0, 1.0]).unwrap();
        assert!(got.abs() <= 1e-15);

        // unsupported order
        assert!(matches!(
            moment_penalty(&Tensor::zeros(vec![4]), PriorKind::UniformSym, 17, &[1.0; 17]),
            Err(Error::UnsupportedMoment { .. })
        ));
    }

    #[test]
    fn moment_penalty_matches_straight_line_oracle() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(4);
        let z: Vec<f64> = (0..100).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let tensor = Tensor::from_flat(z.clone()).unwrap();
        let k = 6;
        let omega = vec![1.0; k];

        let mut oracle = 0.0;
        for i in 1..=k {
            let sample: f64 =
                z.iter().map(|v| v.powi(i as i32)).sum::<f64>() / z.len() as f64;
            let theory = match i {
                2 => 1.0 / 3.0,
                4 => 1.0 / 5.0,
                6 => 1.0 / 7.0,
                _ => 0.0,
            };
            oracle += (theory - sample) * (theory - sample);
        }
        let got = moment_penalty(&tensor, PriorKind::UniformSym, k, &omega).unwrap();
        assert!((got - oracle).abs() <= 1e-12);
    }

    #[test]
    fn penalty_gradient_matches_finite_differences() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let z = Tensor::from_flat((0..40).map(|_| rng.gen_range(-1.5..1.5)).collect()).unwrap();
        let k = 4;
        let omega = [1.0, 0.5, 2.0, 0.25];
        let grad = moment_penalty_grad(&z, PriorKind::StandardNormal, k, &omega).unwrap();
        let step = 1e-6;
        let mut probe = z.clone();
        for j in 0..z.len() {
            let orig = probe.data()[j];
            probe.data_mut()[j] = orig + step;
            let up = moment_penalty(&probe, PriorKind::StandardNormal, k, &omega).unwrap();
            probe.data_mut()[j] = orig - step;
            let down = moment_penalty(&probe, PriorKind::StandardNormal, k, &omega).unwrap();
            probe.data_mut()[j] = orig;
            let fd = (up - down) / (2.0 * step);
            let rel = (grad[j] - fd).abs() / fd.abs().max(1e-9);
            assert!(rel <= 1e-6, "coordinate {j}: analytic {} fd {fd}", grad[j]);
        }
    }

    #[test]
    fn latent_loss_is_additive() {
        let model = small_model(7, 6, PriorKind::StandardNormal);
        let cfg = AttackConfig::for_prior(PriorKind::StandardNormal);
        let z = Tensor::from_flat(vec![0.3, -0.2, 0.8, -0.9, 0.1, 0.5]).unwrap();
        let target = Tensor::filled(vec![3, 2, 2], 0.25);
        let (loss, d, p) = latent_loss(&target, &z, &model, &cfg, None).unwrap();
        let d_direct = distance_mse(&target, &model.forward(&z, None).unwrap()).unwrap();
        let p_direct = moment_penalty(&z, model.prior(), cfg.k, &cfg.omega).unwrap();
        assert!((loss - (d_direct + p_direct)).abs() <= 1e-12);
        assert!((d - d_direct).abs() <= 1e-12);
        assert!((p - p_direct).abs() <= 1e-12);

        // k = 0 collapses the loss to the distance
        let relaxed = cfg.relaxed();
        let (loss0, d0, p0) = latent_loss(&target, &z, &model, &relaxed, None).unwrap();
        assert_eq!(p0, 0.0);
        assert_eq!(loss0, d0);

        // a self-generated target has zero distance
        let self_target = model.forward(&z, None).unwrap();
        let (l_self, _, _) = latent_loss(&self_target, &z, &model, &relaxed, None).unwrap();
        assert_eq!(l_self, 0.0);
    }

    #[test]
    fn clip_hard_examples() {
        let z = Tensor::from_flat(vec![1.5, -2.0, 0.3]).unwrap();
        assert_eq!(clip_hard(&z).data(), &[1.0, -1.0, 0.3]);
        let in_range = Tensor::from_flat(vec![0.9, -0.99, 0.0]).unwrap();
        assert_eq!(clip_hard(&in_range), in_range);
        assert_eq!(clip_hard(&clip_hard(&z)), clip_hard(&z));
    }

    #[test]
    fn clip_stochastic_contract() {
        let z = Tensor::from_flat(vec![0.5, 3.7, -0.25, -9.0]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let clipped = clip_stochastic(&z, &mut rng);
        assert_eq!(clipped.data()[0], 0.5);
        assert_eq!(clipped.data()[2], -0.25);
        assert!((-1.0..=1.0).contains(&clipped.data()[1]));
        assert!((-1.0..=1.0).contains(&clipped.data()[3]));

        let mut rng2 = ChaCha8Rng::seed_from_u64(42);
        let again = clip_stochastic(&z, &mut rng2);
        assert_eq!(clipped, again, "same seed must reproduce the same draw");

        let in_range = Tensor::from_flat(vec![0.1, -0.2]).unwrap();
        let mut rng3 = ChaCha8Rng::seed_from_u64(1);
        assert_eq!(clip_stochastic(&in_range, &mut rng3), in_range);
    }

    #[test]
    fn zero_iterations_returns_the_seeded_initial_point() {
        let model = small_model(8, 5, PriorKind::StandardNormal);
        let target = Tensor::filled(vec![3, 2, 2], 0.75);
        let mut cfg = AttackConfig::for_prior(PriorKind::StandardNormal).with_seed(123);
        cfg.max_iters = 0;
        let result = search(&model, &target, &cfg, None).unwrap();

        let mut rng = ChaCha8Rng::seed_from_u64(123);
        let z0 = model.prior().sample(&mut rng, 5);
        assert_eq!(result.z_hat, z0);
        let (l0, _, _) = latent_loss(&target, &z0, &model, &cfg, None).unwrap();
        assert_eq!(result.best_loss, l0);
        assert_eq!(result.trajectory, vec![(0, l0)]);
        assert_eq!(result.iterations_run, 0);
    }

    #[test]
    fn search_is_seed_deterministic_and_never_regresses() {
        let model = small_model(9, 8, PriorKind::UniformSym);
        let target = Tensor::filled(vec![3, 2, 2], 0.9);
        let mut cfg = AttackConfig::for_prior(PriorKind::UniformSym).with_seed(7);
        cfg.max_iters = 150;
        let a = search(&model, &target, &cfg, None).unwrap();
        let b = search(&model, &target, &cfg, None).unwrap();
        assert_eq!(a.z_hat, b.z_hat);
        assert_eq!(a.best_loss.to_bits(), b.best_loss.to_bits());
        assert_eq!(a.trajectory, b.trajectory);

        // best-iterate selection cannot regress past the initial loss
        let loss0 = a.trajectory[0].1;
        assert!(a.best_loss <= loss0);
        // and the reported components re-add to the loss
        assert!((a.best_loss - (a.distance_value + a.penalty_value)).abs() <= 1e-9);
        // trajectory minimum is the best loss
        let min_traj = a
            .trajectory
            .iter()
            .map(|&(_, l)| l)
            .fold(f64::INFINITY, f64::min);
        assert!((min_traj - a.best_loss).abs() <= 1e-9);
        // hard clipping keeps all coordinates bounded
        assert!(a.z_hat.data().iter().all(|v| v.abs() <= 1.0));
    }

    #[test]
    fn interpolate_contract() {
        let a = Tensor::from_flat(vec![0.0, 0.0, 0.0]).unwrap();
        let b = Tensor::from_flat(vec![1.0, 1.0, 1.0]).unwrap();
        let path = interpolate(&a, &b, 3).unwrap();
        assert_eq!(path.len(), 3);
        assert_eq!(path[0], a);
        assert_eq!(path[2], b);
        assert_eq!(path[1].data(), &[0.5, 0.5, 0.5]);

        let same = interpolate(&a, &a, 5).unwrap();
        assert!(same.iter().all(|z| *z == a));

        assert!(interpolate(&a, &b, 1).is_err());
    }
}
