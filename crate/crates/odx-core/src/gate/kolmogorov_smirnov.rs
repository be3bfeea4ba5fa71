//! One-sample two-sided Kolmogorov-Smirnov test against a fully specified null.
//!
//! The p-value uses the asymptotic Kolmogorov series with Stephens' effective
//! sample-size correction, which is accurate in the n = 100..512 regime the
//! gate operates in.

use crate::error::{Error, Result};
use crate::prior::PriorKind;
use crate::tensor::Tensor;

use super::{sorted_pit, TestKind, TestReport};

pub fn kolmogorov_smirnov(z: &Tensor, prior: PriorKind) -> Result<TestReport> {
    let n = z.len();
    if n == 0 {
        return Err(Error::SampleSize {
            n,
            requirement: "kolmogorov_smirnov needs at least 1 observation".to_string(),
        });
    }

    let u = sorted_pit(z, prior);
    let nf = n as f64;
    let mut d = 0.0f64;
    for (i, &ui) in u.iter().enumerate() {
        let above = (i + 1) as f64 / nf - ui;
        let below = ui - i as f64 / nf;
        d = d.max(above).max(below);
    }

    let lambda = (nf.sqrt() + 0.12 + 0.11 / nf.sqrt()) * d;
    let p_value = kolmogorov_tail(lambda).clamp(0.0, 1.0);

    Ok(TestReport {
        test: TestKind::KolmogorovSmirnov,
        statistic: d,
        p_value,
        n,
        accepted_at: None,
    })
}

/// Q(lambda) = 2 sum_{j>=1} (-1)^{j-1} exp(-2 j^2 lambda^2), truncated once
/// terms drop below 1e-12.
fn kolmogorov_tail(lambda: f64) -> f64 {
    if lambda <= 0.0 {
        return 1.0;
    }
    let mut sum = 0.0;
    let mut sign = 1.0;
    for j in 1..=1000u32 {
        let term = (-2.0 * (j as f64 * lambda).powi(2)).exp();
        sum += sign * term;
        if term < 1e-12 {
            break;
        }
        sign = -sign;
    }
    2.0 * sum
}
