//! The sequence network: embedding, bidirectional LSTM, global max
//! pooling, dense sigmoid head.
//!
//! Tokens embed as the sum of an action-table row and a delta-table row —
//! exactly the product of the concatenated embedding matrix with the
//! token's two-hot vector. The embedded sequence runs through two LSTMs,
//! one per direction, over the valid (non-pad) timesteps only; their
//! per-timestep outputs concatenate to `2H` columns. Global max pooling
//! takes the coordinate-wise maximum over valid timesteps and remembers
//! the earliest maximizing timestep per coordinate, so backpropagation
//! routes each pooled coordinate's gradient to exactly one timestep.
//!
//! Training minimizes binary cross entropy with minibatch SGD; gradients
//! come from exact backpropagation through time ([`backward`]), verified
//! against central finite differences by [`gradcheck`]. All arithmetic is
//! `f64` and every seeded entry point is deterministic.

pub mod gradcheck;

mod backward;
mod forward;
mod mat;
mod params;
mod train;

pub use backward::{backward, Gradients};
pub use forward::{
    bce_loss, blstm_forward, embed_tokens, forward, global_max_pool, lstm_step, ForwardCache,
};
pub use mat::Mat;
pub use params::{EmbeddingMatrix, GritNetModel, LstmDirectionParams};
pub use train::{predict, sgd_train, TrainError};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("{what} index {index} out of range for size {size}")]
    IndexOutOfRange {
        what: &'static str,
        index: usize,
        size: usize,
    },
    #[error("malformed model text: {0}")]
    MalformedModel(String),
}
