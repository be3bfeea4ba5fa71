//! `odx sweep` — evaluate several models over shared targets.

use clap::Args;
use odx_core::eval::{evaluate, rows_to_csv};
use odx_core::gate::TestKind;
use odx_core::gtc::load_generator;
use odx_core::pnm::read_image_dir;
use odx_core::Result;

use crate::commands::AttackConfigFile;
use crate::reports::write_atomic;
use crate::JobsArg;

#[derive(Args)]
pub struct SweepArgs {
    /// Comma-separated generator containers.
    #[arg(long)]
    models: String,
    /// Directory of target images.
    #[arg(long)]
    targets: String,
    /// Attack configuration JSON (missing fields take protocol defaults).
    #[arg(long)]
    config: Option<String>,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    /// ad | ks | sw.
    #[arg(long, default_value = "ad")]
    test: String,
    #[command(flatten)]
    jobs: JobsArg,
    /// Output CSV table.
    #[arg(long)]
    out: String,
}

pub fn run(args: SweepArgs) -> Result<u8> {
    let targets: Vec<_> = read_image_dir(&args.targets)?
        .into_iter()
        .map(|(_, t)| t)
        .collect();
    let file_cfg = match &args.config {
        Some(path) => AttackConfigFile::load(path)?,
        None => AttackConfigFile::default(),
    };
    let test = TestKind::parse(&args.test)?;

    let mut rows = Vec::new();
    for path in args.models.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let model = load_generator(path)?;
        let cfg = file_cfg.resolve(model.prior())?;
        let row = args
            .jobs
            .install(|| evaluate(&model, &targets, &cfg, args.alpha, test))?;
        rows.push(row);
    }

    write_atomic(rows_to_csv(&rows).as_bytes(), &args.out)?;
    println!("wrote {} ({} rows)", args.out, rows.len());
    Ok(0)
}
