//! Q-network, DQN loss and updates, replay memory and checkpoints.

mod checkpoint;
mod conv;
mod dense;
mod dqn;
mod network;
mod observation;
mod replay;

pub use checkpoint::{
    decode_params, encode_params, Checkpoint, RngState, CHECKPOINT_FORMAT, CHECKPOINT_VERSION,
};
pub use conv::ConvStack;
pub use dense::DenseStack;
pub use dqn::{
    batch_loss, gradient, loss_and_gradient, sgd_step, sync_target, td_target, td_targets,
    TargetNetwork,
};
pub use network::{argmax, ForwardCache, NetworkSpec, QNetwork};
pub use observation::{ObservationConfig, GRID_CHANNELS};
pub use replay::{Experience, ReplayBuffer};
