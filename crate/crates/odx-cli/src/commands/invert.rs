//! `odx invert` — the latent-search attack against one target.

use clap::Args;
use odx_core::attack::{search, AttackConfig, ClippingKind, DistanceKind};
use odx_core::gtc::load_generator;
use odx_core::latents::write_latents;
use odx_core::pnm::{read_image, write_image};
use odx_core::{Error, Result};
use serde::Serialize;

use crate::commands::{parse_omega, AttackConfigEcho};
use crate::reports::{write_json, VERSION};

#[derive(Args)]
pub struct InvertArgs {
    /// Generator container.
    #[arg(long)]
    model: String,
    /// Target image (.ppm or .pgm).
    #[arg(long)]
    target: String,
    /// Class to condition on (conditional generators only).
    #[arg(long = "class")]
    class: Option<usize>,
    /// mse | xe (default mse).
    #[arg(long)]
    distance: Option<String>,
    /// Penalized moment count (default 4 for the normal prior, 6 for uniform).
    #[arg(long)]
    k: Option<usize>,
    /// Comma-separated moment weights (default all ones).
    #[arg(long)]
    omega: Option<String>,
    /// Learning rate (default 0.01).
    #[arg(long)]
    lr: Option<f64>,
    /// Iteration budget (default 2000).
    #[arg(long)]
    iters: Option<usize>,
    /// none | hard | stochastic (default hard for uniform prior, else none).
    #[arg(long)]
    clip: Option<String>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Where to write the adversarial latent vector.
    #[arg(long = "out-latent")]
    out_latent: String,
    /// Where to write the generated image.
    #[arg(long = "out-image")]
    out_image: String,
    /// Where to write the JSON report.
    #[arg(long)]
    report: String,
}

#[derive(Serialize)]
struct InvertReport<'a> {
    version: &'a str,
    config: InvertEcho<'a>,
    best_loss: f64,
    distance_value: f64,
    penalty_value: f64,
    iterations_run: usize,
    trajectory: &'a [(usize, f64)],
}

#[derive(Serialize)]
struct InvertEcho<'a> {
    model: &'a str,
    target: &'a str,
    class: Option<usize>,
    prior: &'a str,
    latent_dim: usize,
    #[serde(flatten)]
    attack: AttackConfigEcho,
    output_latent: &'a str,
    output_image: &'a str,
}

pub fn run(args: InvertArgs) -> Result<u8> {
    let model = load_generator(&args.model)?;
    let target = read_image(&args.target)?;

    let mut cfg = AttackConfig::for_prior(model.prior()).with_seed(args.seed);
    if let Some(d) = &args.distance {
        cfg.distance = DistanceKind::parse(d)?;
    }
    if let Some(k) = args.k {
        cfg.k = k;
        cfg.omega = vec![1.0; k];
    }
    if let Some(omega) = &args.omega {
        cfg.omega = parse_omega(omega)?;
        if args.k.is_none() {
            cfg.k = cfg.omega.len();
        }
    }
    if let Some(lr) = args.lr {
        cfg.eta = lr;
    }
    if let Some(iters) = args.iters {
        cfg.max_iters = iters;
    }
    if let Some(clip) = &args.clip {
        cfg.clipping = ClippingKind::parse(clip)?;
    }
    cfg.validate()
        .map_err(|e| Error::parameter(format!("invalid attack flags: {e}")))?;

    let result = search(&model, &target, &cfg, args.class)?;

    write_latents(std::slice::from_ref(&result.z_hat), &args.out_latent)?;
    write_image(&result.x_hat, &args.out_image)?;
    write_json(
        &InvertReport {
            version: VERSION,
            config: InvertEcho {
                model: &args.model,
                target: &args.target,
                class: result.y,
                prior: model.prior().name(),
                latent_dim: model.latent_dim(),
                attack: AttackConfigEcho::from(&cfg),
                output_latent: &args.out_latent,
                output_image: &args.out_image,
            },
            best_loss: result.best_loss,
            distance_value: result.distance_value,
            penalty_value: result.penalty_value,
            iterations_run: result.iterations_run,
            trajectory: &result.trajectory,
        },
        &args.report,
    )?;
    println!(
        "best_loss={} distance={} penalty={}",
        result.best_loss, result.distance_value, result.penalty_value
    );
    Ok(0)
}
