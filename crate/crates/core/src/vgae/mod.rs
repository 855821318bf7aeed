//! Relational graph-convolutional variational graph autoencoder over the
//! street + bridge subgraph.

mod checkpoint;
mod encoder_graph;
mod gradcheck;
mod layer;
mod loss;
mod model;
mod train;

pub use checkpoint::{read_checkpoint, write_checkpoint, write_embeddings_csv, Checkpoint, CHECKPOINT_VERSION};
pub use encoder_graph::{EncoderGraph, RelationAdjacency, ENCODER_RELATIONS};
pub use gradcheck::{grad_check, grad_check_with, GradCheckOptions, GradCheckReport};
pub use layer::{LayerCache, LayerGrads, RgcnLayer};
pub use loss::{decode_edge, kl_divergence, loss, reparameterize, reparameterize_with, sigmoid, softplus, LossParts};
pub use model::{beta_schedule, EncoderConfig, ForwardPass, RgcnWeights, LOGVAR_MAX, LOGVAR_MIN};
pub use train::{link_auc, standardize_columns, train, train_with, EpochStats, LatentEmbedding, StopReason, TrainReport, Trained};

#[derive(Debug, thiserror::Error)]
pub enum VgaeError {
    #[error("feature matrix is {found:?}, expected {expected:?}")]
    DimensionMismatch { expected: (usize, usize), found: (usize, usize) },
    #[error("no positive or negative edges to score")]
    EmptyEdgeSet,
    #[error("encoder graph has no nodes")]
    EmptyGraph,
    #[error("loss became non-finite at epoch {epoch}")]
    NonFiniteLoss { epoch: usize },
    #[error("invalid encoder config: {0}")]
    InvalidConfig(String),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
}
