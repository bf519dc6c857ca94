//! Model parameters, forward passes, loss and analytic gradients.

mod backward;
pub mod checkpoint;
mod conv;
mod forward;
mod loss;
mod params;

pub use backward::backward;
pub use conv::{conv1d, same_padding, ConvGeometry};
pub use forward::{forward, forward_caml, forward_cnn, DocTrace, Dropout, ForwardTrace, Pooling};
pub use loss::{bce_loss, bce_with_logit, sigmoid};
pub use params::{Arch, Gradients, Hyperparams, ModelParams, ModelShape};
