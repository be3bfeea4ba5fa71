//! Latent priors: the distributions generator inputs are legitimately drawn from.
//!
//! Two priors are supported, the standard normal and the symmetric uniform on
//! [-1, 1]. Both expose their null CDF (used by the goodness-of-fit gate) and
//! closed-form raw moments (used by the moment penalty): for the standard
//! normal the even raw moments are the double factorials (i-1)!!, for the
//! uniform they are 1/(i+1); all odd raw moments vanish by symmetry.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gate::normal::phi;
use crate::tensor::Tensor;

/// Highest raw-moment order with a closed form wired in.
pub const MAX_MOMENT_ORDER: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PriorKind {
    #[serde(rename = "normal")]
    StandardNormal,
    #[serde(rename = "uniform")]
    UniformSym,
}

impl PriorKind {
    /// Short name used in CLI flags and container manifests.
    pub fn name(&self) -> &'static str {
        match self {
            PriorKind::StandardNormal => "normal",
            PriorKind::UniformSym => "uniform",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "normal" => Ok(PriorKind::StandardNormal),
            "uniform" => Ok(PriorKind::UniformSym),
            other => Err(Error::parameter(format!(
                "unknown prior {other:?}: expected \"normal\" or \"uniform\""
            ))),
        }
    }

    /// The null CDF F under this prior.
    pub fn cdf(&self, x: f64) -> f64 {
        match self {
            PriorKind::StandardNormal => phi(x),
            PriorKind::UniformSym => ((x + 1.0) / 2.0).clamp(0.0, 1.0),
        }
    }

    /// Raw moment E[Z^order] in closed form.
    pub fn raw_moment(&self, order: usize) -> Result<f64> {
        if order == 0 {
            return Err(Error::parameter("moment order must be >= 1".to_string()));
        }
        if order > MAX_MOMENT_ORDER {
            return Err(Error::UnsupportedMoment {
                order,
                max: MAX_MOMENT_ORDER,
            });
        }
        if order % 2 == 1 {
            return Ok(0.0);
        }
        Ok(match self {
            PriorKind::StandardNormal => double_factorial(order - 1),
            PriorKind::UniformSym => 1.0 / (order as f64 + 1.0),
        })
    }

    /// One scalar draw.
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            PriorKind::StandardNormal => rng.sample(StandardNormal),
            PriorKind::UniformSym => rng.gen_range(-1.0..=1.0),
        }
    }

    /// A latent vector of `n` i.i.d. draws. `n` must be positive.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R, n: usize) -> Tensor {
        assert!(n > 0, "latent dimension must be positive");
        let data: Vec<f64> = (0..n).map(|_| self.draw(rng)).collect();
        Tensor::new(vec![n], data).expect("prior draws are finite")
    }
}

fn double_factorial(k: usize) -> f64 {
    let mut acc = 1.0;
    let mut i = k;
    while i > 1 {
        acc *= i as f64;
        i -= 2;
    }
    acc
}
