//! The column network: a fully connected tanh MLP with a linear output
//! layer, per-channel normalization, exact forward/reverse derivative
//! products, Adam, dropout and early-stopped minibatch training.

mod adam;
pub mod io;
mod mlp;
mod train;

pub use adam::{AdamConfig, AdamState};
pub use mlp::{param_count, Activation, ChannelStats, DropoutMask, NetParams, NormStats};
pub use train::{
    batch_loss_and_gradient, mean_loss, train, ColumnSample, EpochLog, TrainConfig, TrainReport,
};
