//! Small MLP encoder with closed-form backprop, Adam with warm-up, and the
//! exponential-moving-average momentum update.

mod adam;
mod ema;
mod mlp;
mod params;

pub use adam::{AdamConfig, OptimizerState};
pub use ema::ema_update;
pub use mlp::{Activation, ForwardCache, Mlp};
pub use params::{LayerParams, ParamSet};
