//! The two-branch autoencoder, its objective and the training loop.

pub mod config;
mod grid;
pub mod loss;
mod network;
mod train;

pub use config::{AdjLossMode, EgoEncoderKind, MergeFn, MvgeConfig, TaskMask};
pub use grid::{grid_search_alpha_beta, grid_values, GridPoint, GridSearchResult};
pub use loss::{
    adjacency_loss, adjacency_loss_and_grad, kl_feature_loss, loss_weights, total_loss, AdjacencyMode,
    KlTarget, PairSample,
};
pub use network::{merge_embeddings, EmbeddingSet, EmbeddingView, Evaluation, LossParts, MvgeModel, Objective};
pub use train::{embedding_dim_std, mean, train, train_on_views, TrainOutput, TrainTrace};
