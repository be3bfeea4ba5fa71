//! Forcing image generators to emit arbitrary targets by optimizing their
//! latent inputs, plus the statistical gate a defender would use to screen
//! those inputs, and the harness that measures both sides at desk scale.

pub mod attack;
pub mod error;
pub mod eval;
pub mod gate;
pub mod gtc;
pub mod latents;
pub mod layer;
pub mod model;
pub mod optim;
pub mod pnm;
pub mod prior;
pub mod stack;
pub mod tensor;
pub mod train;

pub use error::{Error, Result};
pub use model::{DiscriminatorModel, GeneratorModel};
pub use prior::PriorKind;
pub use tensor::Tensor;
