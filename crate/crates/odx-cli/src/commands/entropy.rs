//! `odx entropy` — pooled Shannon entropy of an image directory.

use clap::Args;
use odx_core::eval::shannon_entropy;
use odx_core::pnm::read_image_dir;
use odx_core::Result;
use serde::Serialize;

use crate::reports::VERSION;

#[derive(Args)]
pub struct EntropyArgs {
    /// Directory of .ppm/.pgm images.
    #[arg(long)]
    images: String,
    /// Use at most this many images (taken in sorted file order).
    #[arg(long, default_value_t = 1024)]
    sample: usize,
    #[arg(long, default_value_t = 256)]
    bins: usize,
}

#[derive(Serialize)]
struct EntropyReport<'a> {
    version: &'a str,
    config: EntropyEcho<'a>,
    entropy_bits: f64,
}

#[derive(Serialize)]
struct EntropyEcho<'a> {
    images: &'a str,
    images_used: usize,
    bins: usize,
    sample: usize,
}

pub fn run(args: EntropyArgs) -> Result<u8> {
    let mut images: Vec<_> = read_image_dir(&args.images)?
        .into_iter()
        .map(|(_, t)| t)
        .collect();
    images.truncate(args.sample);
    let bits = shannon_entropy(&images, args.bins)?;
    let report = EntropyReport {
        version: VERSION,
        config: EntropyEcho {
            images: &args.images,
            images_used: images.len(),
            bins: args.bins,
            sample: args.sample,
        },
        entropy_bits: bits,
    };
    println!(
        "{}",
        serde_json::to_string_pretty(&report).expect("report serializes")
    );
    Ok(0)
}
