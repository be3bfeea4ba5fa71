//! `odx evaluate` — the batch-attack protocol for one generator.

use clap::Args;
use odx_core::eval::{evaluate_detailed, rows_to_csv, EvalRow};
use odx_core::gate::TestKind;
use odx_core::gtc::load_generator;
use odx_core::pnm::read_image_dir;
use odx_core::{Error, Result};
use serde::Serialize;

use crate::commands::{AttackConfigEcho, AttackConfigFile};
use crate::reports::{write_atomic, write_json, VERSION};
use crate::JobsArg;

#[derive(Args)]
pub struct EvaluateArgs {
    /// Generator container.
    #[arg(long)]
    model: String,
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
    /// Also emit the JSON row (with per-class breakdown when conditional).
    #[arg(long = "out-json")]
    out_json: Option<String>,
    /// Require and include the per-class breakdown.
    #[arg(long = "per-class")]
    per_class: bool,
    /// Export the produced adversarial latents to this CSV.
    #[arg(long = "export-latents")]
    export_latents: Option<String>,
}

#[derive(Serialize)]
struct EvaluateReport<'a> {
    version: &'a str,
    config: EvaluateEcho<'a>,
    row: &'a EvalRow,
}

#[derive(Serialize)]
pub(super) struct EvaluateEcho<'a> {
    pub model: &'a str,
    pub targets: &'a str,
    pub target_count: usize,
    pub alpha: f64,
    pub test: &'a str,
    #[serde(flatten)]
    pub attack: AttackConfigEcho,
}

pub fn run(args: EvaluateArgs) -> Result<u8> {
    let model = load_generator(&args.model)?;
    if args.per_class && model.class_count().is_none() {
        return Err(Error::configuration(
            "--per-class requires a conditional model".to_string(),
        ));
    }
    let targets: Vec<_> = read_image_dir(&args.targets)?
        .into_iter()
        .map(|(_, t)| t)
        .collect();
    let file_cfg = match &args.config {
        Some(path) => AttackConfigFile::load(path)?,
        None => AttackConfigFile::default(),
    };
    let cfg = file_cfg.resolve(model.prior())?;
    let test = TestKind::parse(&args.test)?;

    let outcome =
        args.jobs
            .install(|| evaluate_detailed(&model, &targets, &cfg, args.alpha, test))?;

    let mut row = outcome.row.clone();
    if !args.per_class {
        row.per_class = None;
    }

    write_atomic(rows_to_csv(std::slice::from_ref(&row)).as_bytes(), &args.out)?;
    if let Some(json_path) = &args.out_json {
        write_json(
            &EvaluateReport {
                version: VERSION,
                config: EvaluateEcho {
                    model: &args.model,
                    targets: &args.targets,
                    target_count: targets.len(),
                    alpha: args.alpha,
                    test: test.name(),
                    attack: AttackConfigEcho::from(&cfg),
                },
                row: &row,
            },
            json_path,
        )?;
    }
    if let Some(latents_path) = &args.export_latents {
        let vectors: Vec<_> = outcome.attacks.iter().map(|a| a.z_hat.clone()).collect();
        odx_core::eval::export_latents(&vectors, latents_path)?;
    }
    println!(
        "avg_mse={} test_success={} avg_mse_relaxed={}",
        row.avg_mse, row.test_success_rate, row.avg_mse_relaxed
    );
    Ok(0)
}
