//! `odx validate` — the defender's gate over a latent CSV.
//!
//! Every row is tested; the process accepts (exit 0) only when every vector
//! passes at the requested level.

use clap::Args;
use odx_core::gate::{validate_report, TestKind};
use odx_core::latents::read_latents;
use odx_core::prior::PriorKind;
use odx_core::Result;
use serde::Serialize;

use crate::reports::VERSION;

#[derive(Args)]
pub struct ValidateArgs {
    /// Latent CSV (one vector per row).
    #[arg(long)]
    latent: String,
    /// normal | uniform.
    #[arg(long)]
    prior: String,
    /// ad | ks | sw.
    #[arg(long, default_value = "ad")]
    test: String,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
}

#[derive(Serialize)]
struct RowReport {
    row: usize,
    test: TestKind,
    statistic: f64,
    p_value: f64,
    n: usize,
    alpha: f64,
    accepted: bool,
}

#[derive(Serialize)]
struct ValidateReport<'a> {
    version: &'a str,
    config: ValidateEcho<'a>,
    rows: Vec<RowReport>,
    all_accepted: bool,
}

#[derive(Serialize)]
struct ValidateEcho<'a> {
    latent: &'a str,
    prior: &'a str,
    test: &'a str,
    alpha: f64,
}

pub fn run(args: ValidateArgs) -> Result<u8> {
    let prior = PriorKind::parse(&args.prior)?;
    let test = TestKind::parse(&args.test)?;
    let vectors = read_latents(&args.latent)?;

    let mut rows = Vec::with_capacity(vectors.len());
    let mut all_accepted = true;
    for (row, z) in vectors.iter().enumerate() {
        let report = validate_report(z, prior, test, args.alpha)?;
        let accepted = report.accepted_at.expect("decision requested").accepted;
        all_accepted &= accepted;
        rows.push(RowReport {
            row,
            test: report.test,
            statistic: report.statistic,
            p_value: report.p_value,
            n: report.n,
            alpha: args.alpha,
            accepted,
        });
    }

    let report = ValidateReport {
        version: VERSION,
        config: ValidateEcho {
            latent: &args.latent,
            prior: prior.name(),
            test: test.name(),
            alpha: args.alpha,
        },
        rows,
        all_accepted,
    };
    println!(
        "{}",
        serde_json::to_string_pretty(&report).expect("report serializes")
    );
    Ok(u8::from(!all_accepted))
}
