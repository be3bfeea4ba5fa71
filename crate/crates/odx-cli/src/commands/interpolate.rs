//! `odx interpolate` — render the linear path between two latent vectors.

use clap::Args;
use odx_core::attack::interpolate;
use odx_core::gtc::load_generator;
use odx_core::latents::{read_latents, write_latents};
use odx_core::pnm::write_image;
use odx_core::Result;

use crate::reports::ensure_dir;

#[derive(Args)]
pub struct InterpolateArgs {
    /// Generator container.
    #[arg(long)]
    model: String,
    /// CSV holding the start vector (first row is used).
    #[arg(long)]
    from: String,
    /// CSV holding the end vector (first row is used).
    #[arg(long)]
    to: String,
    #[arg(long, default_value_t = 8)]
    steps: usize,
    /// Class to condition on (conditional generators only).
    #[arg(long = "class")]
    class: Option<usize>,
    /// Output directory for frames and the interpolated latents.
    #[arg(long)]
    out: String,
}

pub fn run(args: InterpolateArgs) -> Result<u8> {
    let model = load_generator(&args.model)?;
    let from = read_latents(&args.from)?.remove(0);
    let to = read_latents(&args.to)?.remove(0);
    let path = interpolate(&from, &to, args.steps)?;

    ensure_dir(&args.out)?;
    let dir = std::path::Path::new(&args.out);
    for (idx, z) in path.iter().enumerate() {
        let image = model.forward(z, args.class)?;
        write_image(&image, dir.join(format!("frame_{idx:03}.ppm")))?;
    }
    write_latents(&path, dir.join("latents.csv"))?;
    println!("wrote {} frames to {}", path.len(), args.out);
    Ok(0)
}
