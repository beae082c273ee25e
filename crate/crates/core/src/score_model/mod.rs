//! Convolutional score network, denoising score-matching training and
//! checkpoint storage.

mod checkpoint;
pub mod gemm;
mod net;
mod train;

pub use checkpoint::{load_checkpoint, save_checkpoint};
pub use net::{Mode, ScoreNet, TensorInfo, DEFAULT_DEPTH, DEFAULT_WIDTH};
pub use train::{
    augment, check_normalized, dsm_loss, evaluate_loss, smoothed, train, train_from, TrainConfig,
    TrainReport,
};
