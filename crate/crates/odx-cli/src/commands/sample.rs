//! `odx sample` — render prior draws through a generator.

use clap::Args;
use odx_core::gtc::load_generator;
use odx_core::pnm::write_image;
use odx_core::train::sample;
use odx_core::Result;

use crate::reports::ensure_dir;

#[derive(Args)]
pub struct SampleArgs {
    /// Generator container.
    #[arg(long)]
    model: String,
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Class to condition on (conditional generators only).
    #[arg(long = "class")]
    class: Option<usize>,
    /// Output directory.
    #[arg(long)]
    out: String,
}

pub fn run(args: SampleArgs) -> Result<u8> {
    let model = load_generator(&args.model)?;
    let images = sample(&model, args.n, args.seed, args.class)?;
    ensure_dir(&args.out)?;
    let dir = std::path::Path::new(&args.out);
    for (idx, image) in images.iter().enumerate() {
        write_image(image, dir.join(format!("sample_{idx:04}.ppm")))?;
    }
    println!("wrote {} images to {}", images.len(), args.out);
    Ok(0)
}
