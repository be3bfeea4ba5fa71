//! `odx train`

use clap::Args;
use odx_core::gtc::{save_model, Model};
use odx_core::pnm::read_image_dir;
use odx_core::prior::PriorKind;
use odx_core::train::{
    make_toy_dataset, train_acgan, train_gan, ToyDataset, ToyKind, TrainConfig, TrainRecord,
};
use odx_core::{Error, Result};
use serde::Serialize;

use crate::reports::{write_json, VERSION};

#[derive(Args)]
pub struct TrainArgs {
    /// flat | stripes | texture, or a directory of .ppm/.pgm images.
    #[arg(long)]
    dataset: String,
    /// Train with the auxiliary classifier (labeled toy datasets only).
    #[arg(long)]
    acgan: bool,
    #[arg(long = "latent-dim")]
    latent_dim: usize,
    /// Latent prior: normal | uniform.
    #[arg(long)]
    prior: String,
    #[arg(long, default_value_t = 3000)]
    iters: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output container path.
    #[arg(long)]
    out: String,
    /// Training-log JSON path.
    #[arg(long)]
    log: String,
    /// Toy dataset size.
    #[arg(long, default_value_t = 256)]
    count: usize,
    /// Toy image side length (images are 3 x size x size).
    #[arg(long, default_value_t = 8)]
    size: usize,
    #[arg(long, default_value_t = 32)]
    batch: usize,
    #[arg(long = "g-lr", default_value_t = 2e-4)]
    g_lr: f64,
    #[arg(long = "d-lr", default_value_t = 4e-4)]
    d_lr: f64,
}

#[derive(Serialize)]
struct TrainReport<'a> {
    version: &'a str,
    config: TrainEcho<'a>,
    records: &'a [TrainRecord],
}

#[derive(Serialize)]
struct TrainEcho<'a> {
    dataset: &'a str,
    acgan: bool,
    latent_dim: usize,
    prior: &'a str,
    iterations: usize,
    batch_size: usize,
    g_lr: f64,
    d_lr: f64,
    seed: u64,
    class_count: Option<usize>,
    dataset_count: usize,
    image_shape: (usize, usize, usize),
    model_out: &'a str,
}

fn load_dataset(args: &TrainArgs) -> Result<ToyDataset> {
    if let Ok(kind) = ToyKind::parse(&args.dataset) {
        return make_toy_dataset(kind, args.count, (3, args.size, args.size), args.seed);
    }
    let dir = std::path::Path::new(&args.dataset);
    if !dir.is_dir() {
        return Err(Error::parameter(format!(
            "--dataset {:?} is neither a toy dataset name nor a directory",
            args.dataset
        )));
    }
    let images: Vec<_> = read_image_dir(dir)?.into_iter().map(|(_, t)| t).collect();
    let shape = images[0].shape().to_vec();
    if images.iter().any(|t| t.shape() != shape) {
        return Err(Error::dimension(format!(
            "images in {} do not share one shape",
            dir.display()
        )));
    }
    Ok(ToyDataset {
        name: dir
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_else(|| "dir".to_string()),
        images,
        labels: None,
        class_count: None,
    })
}

pub fn run(args: TrainArgs) -> Result<u8> {
    let prior = PriorKind::parse(&args.prior)?;
    let dataset = load_dataset(&args)?;

    let mut cfg = TrainConfig::new(args.latent_dim, prior)
        .with_seed(args.seed)
        .with_iterations(args.iters);
    cfg.batch_size = args.batch;
    cfg.g_lr = args.g_lr;
    cfg.d_lr = args.d_lr;

    let output = if args.acgan {
        cfg.class_count = dataset.class_count;
        if cfg.class_count.is_none() {
            return Err(Error::configuration(
                "--acgan requires a labeled toy dataset (flat, stripes or texture)".to_string(),
            ));
        }
        train_acgan(&dataset, &cfg)?
    } else {
        train_gan(&dataset, &cfg)?
    };

    let shape = dataset.shape();
    save_model(&Model::Generator(output.generator), &args.out)?;
    write_json(
        &TrainReport {
            version: VERSION,
            config: TrainEcho {
                dataset: &dataset.name,
                acgan: args.acgan,
                latent_dim: args.latent_dim,
                prior: prior.name(),
                iterations: args.iters,
                batch_size: args.batch,
                g_lr: args.g_lr,
                d_lr: args.d_lr,
                seed: args.seed,
                class_count: cfg.class_count,
                dataset_count: dataset.images.len(),
                image_shape: shape,
                model_out: &args.out,
            },
            records: &output.log,
        },
        &args.log,
    )?;
    println!("wrote {} and {}", args.out, args.log);
    Ok(0)
}
