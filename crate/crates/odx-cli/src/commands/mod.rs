pub mod entropy;
pub mod evaluate;
pub mod interpolate;
pub mod invert;
pub mod model;
pub mod sample;
pub mod sweep;
pub mod train;
pub mod validate;

use odx_core::attack::{AttackConfig, ClippingKind, DistanceKind};
use odx_core::optim::AdamParams;
use odx_core::prior::PriorKind;
use odx_core::{Error, Result};
use serde::{Deserialize, Serialize};

/// Attack configuration as read from `--config` JSON files; every field is
/// optional and falls back to the paper-protocol default for the model's
/// prior.
#[derive(Debug, Default, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AttackConfigFile {
    pub distance: Option<String>,
    pub k: Option<usize>,
    pub omega: Option<Vec<f64>>,
    pub eta: Option<f64>,
    pub max_iters: Option<usize>,
    pub clipping: Option<String>,
    pub seed: Option<u64>,
    pub adam: Option<AdamParams>,
    pub record_stride: Option<usize>,
}

impl AttackConfigFile {
    pub fn load(path: &str) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path.to_string(), e))?;
        serde_json::from_str(&text)
            .map_err(|e| Error::format(0, format!("{path}: invalid attack config: {e}")))
    }

    /// Materializes the effective config for a model prior.
    pub fn resolve(&self, prior: PriorKind) -> Result<AttackConfig> {
        let mut cfg = AttackConfig::for_prior(prior);
        if let Some(d) = &self.distance {
            cfg.distance = DistanceKind::parse(d)?;
        }
        if let Some(k) = self.k {
            cfg.k = k;
            cfg.omega = vec![1.0; k];
        }
        if let Some(omega) = &self.omega {
            cfg.omega = omega.clone();
        }
        if let Some(eta) = self.eta {
            cfg.eta = eta;
        }
        if let Some(iters) = self.max_iters {
            cfg.max_iters = iters;
        }
        if let Some(clip) = &self.clipping {
            cfg.clipping = ClippingKind::parse(clip)?;
        }
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        if let Some(adam) = self.adam {
            cfg.adam = adam;
        }
        if let Some(stride) = self.record_stride {
            cfg.record_stride = stride;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Effective attack configuration as echoed into reports.
#[derive(Debug, Serialize)]
pub struct AttackConfigEcho {
    pub distance: DistanceKind,
    pub k: usize,
    pub omega: Vec<f64>,
    pub eta: f64,
    pub max_iters: usize,
    pub clipping: ClippingKind,
    pub seed: u64,
    pub adam: AdamParams,
    pub record_stride: usize,
}

impl From<&AttackConfig> for AttackConfigEcho {
    fn from(cfg: &AttackConfig) -> Self {
        AttackConfigEcho {
            distance: cfg.distance,
            k: cfg.k,
            omega: cfg.omega.clone(),
            eta: cfg.eta,
            max_iters: cfg.max_iters,
            clipping: cfg.clipping,
            seed: cfg.seed,
            adam: cfg.adam,
            record_stride: cfg.record_stride,
        }
    }
}

/// Parses `--omega w1,w2,...` lists.
pub fn parse_omega(text: &str) -> Result<Vec<f64>> {
    text.split(',')
        .map(|f| {
            f.trim()
                .parse::<f64>()
                .map_err(|_| Error::parameter(format!("--omega entry {f:?} is not a number")))
        })
        .collect()
}
