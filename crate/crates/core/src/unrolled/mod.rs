//! The unrolled network: K stages of the splitting iteration with learnable
//! shortcut weights and a shared denoiser, trained end to end.

mod adam;
mod checkpoint;
mod net;
mod train;

pub use adam::{adam_step, AdamState, TrainConfig};
pub use checkpoint::{
    load_checkpoint, read_checkpoint, save_checkpoint, write_checkpoint, Checkpoint,
};
pub use net::{
    loss_and_gradient, mse_loss, unrolled_apply, unrolled_backward, unrolled_forward, NetParams,
    StageDenoiser, StageTape, UnrolledNet,
};
pub use train::{
    batch_indices, feasible_step, grad_check, initialize, loss_csv_row, train, LossRow,
    TrainOutcome, TrainState, LOSS_HEADER,
};
