//! Gaussian embedding models and their training loops.

pub mod checkpoint;
pub mod config;
pub mod dyng2g;
pub mod embeddings;
pub mod g2g;
pub mod gaussian;
pub mod layers;
pub mod registry;
pub mod train;
pub mod transformer;

pub use checkpoint::Checkpoint;
pub use config::{validate_thetas, TrainConfig};
pub use dyng2g::{multistep_init, train_dyng2g, train_g2g, DynG2g};
pub use embeddings::EmbeddingTable;
pub use g2g::G2gEncoder;
pub use gaussian::{kl_divergence, kl_rows, triplet_loss, GaussianEmbedding};
pub use registry::{EmbeddingModel, ModelEntry, Registry};
pub use train::{Encoded, Encoder, EpochRecord, TrainLog};
pub use transformer::{attention, history_matrix, positional_encoding, train_transformer, TransformerG2g};
