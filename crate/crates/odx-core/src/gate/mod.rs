//! The defender's gate: goodness-of-fit tests on submitted latent vectors.
//!
//! A latent vector is accepted when a distributional hypothesis test against
//! the declared prior does not reject at level alpha, i.e. when the p-value
//! satisfies p >= alpha (the boundary accepts). All three tests work against
//! a fully specified null: no parameters are estimated from the sample.
//!
//! For the uniform prior the sample is pushed through the probability
//! integral transform F(x) = (x+1)/2 and tested for uniformity on [0, 1],
//! which is equivalent to testing against the prior directly.

pub mod anderson_darling;
pub mod kolmogorov_smirnov;
pub mod normal;
pub mod shapiro_wilk;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::prior::PriorKind;
use crate::tensor::Tensor;

pub use anderson_darling::anderson_darling;
pub use kolmogorov_smirnov::kolmogorov_smirnov;
pub use shapiro_wilk::shapiro_wilk;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TestKind {
    #[serde(rename = "anderson_darling")]
    AndersonDarling,
    #[serde(rename = "kolmogorov_smirnov")]
    KolmogorovSmirnov,
    #[serde(rename = "shapiro_wilk")]
    ShapiroWilk,
}

impl TestKind {
    pub fn name(&self) -> &'static str {
        match self {
            TestKind::AndersonDarling => "anderson_darling",
            TestKind::KolmogorovSmirnov => "kolmogorov_smirnov",
            TestKind::ShapiroWilk => "shapiro_wilk",
        }
    }

    /// Parses either the full name or the CLI short form (ad/ks/sw).
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "ad" | "anderson_darling" => Ok(TestKind::AndersonDarling),
            "ks" | "kolmogorov_smirnov" => Ok(TestKind::KolmogorovSmirnov),
            "sw" | "shapiro_wilk" => Ok(TestKind::ShapiroWilk),
            other => Err(Error::parameter(format!(
                "unknown test {other:?}: expected ad, ks or sw"
            ))),
        }
    }
}

/// Outcome of one goodness-of-fit test.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TestReport {
    pub test: TestKind,
    /// The test statistic t.
    pub statistic: f64,
    /// Pr(T >= t | H0), in [0, 1].
    pub p_value: f64,
    /// Sample size.
    pub n: usize,
    /// Present when a decision at some alpha was requested.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub accepted_at: Option<Acceptance>,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct Acceptance {
    pub alpha: f64,
    pub accepted: bool,
}

/// Raw sample moment (1/n) sum z_j^i.
pub fn sample_moment(z: &Tensor, order: usize) -> Result<f64> {
    if z.is_empty() {
        return Err(Error::parameter("sample moment of an empty vector"));
    }
    if order == 0 {
        return Err(Error::parameter("moment order must be >= 1"));
    }
    let n = z.len() as f64;
    Ok(z.data().iter().map(|&v| v.powi(order as i32)).sum::<f64>() / n)
}

/// Dispatches to the requested test, enforcing test/prior compatibility.
pub fn run_test(test: TestKind, z: &Tensor, prior: PriorKind) -> Result<TestReport> {
    match test {
        TestKind::AndersonDarling => anderson_darling(z, prior),
        TestKind::KolmogorovSmirnov => kolmogorov_smirnov(z, prior),
        TestKind::ShapiroWilk => {
            if prior != PriorKind::StandardNormal {
                return Err(Error::configuration(
                    "shapiro_wilk tests normality only; it does not apply to the uniform prior"
                        .to_string(),
                ));
            }
            shapiro_wilk(z)
        }
    }
}

/// Decision rule: accept iff p >= alpha. The boundary accepts.
pub fn decide(p_value: f64, alpha: f64) -> bool {
    p_value >= alpha
}

/// The gate: returns true when the vector passes the test at level alpha.
pub fn validate(z: &Tensor, prior: PriorKind, test: TestKind, alpha: f64) -> Result<bool> {
    if !(0.0..1.0).contains(&alpha) || alpha <= 0.0 {
        return Err(Error::parameter(format!(
            "alpha must lie in (0, 1), got {alpha}"
        )));
    }
    let report = run_test(test, z, prior)?;
    Ok(decide(report.p_value, alpha))
}

/// Like [`validate`] but returns the full report with the decision attached.
pub fn validate_report(
    z: &Tensor,
    prior: PriorKind,
    test: TestKind,
    alpha: f64,
) -> Result<TestReport> {
    if !(0.0..1.0).contains(&alpha) || alpha <= 0.0 {
        return Err(Error::parameter(format!(
            "alpha must lie in (0, 1), got {alpha}"
        )));
    }
    let mut report = run_test(test, z, prior)?;
    report.accepted_at = Some(Acceptance {
        alpha,
        accepted: decide(report.p_value, alpha),
    });
    Ok(report)
}

/// Sorted probability-integral transform of the sample under the prior CDF.
pub(crate) fn sorted_pit(z: &Tensor, prior: PriorKind) -> Vec<f64> {
    let mut sorted: Vec<f64> = z.data().to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("tensor data is finite"));
    sorted.into_iter().map(|v| prior.cdf(v)).collect()
}
