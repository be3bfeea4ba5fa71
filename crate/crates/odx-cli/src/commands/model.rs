//! `odx model init-random`

use clap::Args;
use odx_core::gtc::{save_model, Model};
use odx_core::prior::PriorKind;
use odx_core::Result;

use crate::presets::{build_generator, load_arch};

#[derive(Args)]
pub struct InitRandomArgs {
    /// Preset name (mlp8, conv8, conv16) or path to an architecture JSON file.
    #[arg(long)]
    arch: String,
    #[arg(long = "latent-dim")]
    latent_dim: usize,
    /// Latent prior: normal | uniform.
    #[arg(long)]
    prior: String,
    /// Class count for a conditional generator.
    #[arg(long)]
    classes: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output container path.
    #[arg(long)]
    out: String,
}

pub fn init_random(args: InitRandomArgs) -> Result<u8> {
    let prior = PriorKind::parse(&args.prior)?;
    let arch = load_arch(&args.arch)?;
    let model = build_generator(&arch, args.latent_dim, prior, args.classes, args.seed)?;
    save_model(&Model::Generator(model), &args.out)?;
    println!("wrote {}", args.out);
    Ok(0)
}
