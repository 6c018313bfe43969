//! Transformer contour completion: a small reverse-mode autograd engine,
//! the encoder-decoder and encoder-only models built on it, the four-term
//! loss, training with early stopping, checkpoints and greedy decoding.

pub mod batch;
pub mod checkpoint;
pub mod config;
pub mod diagnostics;
pub mod error;
pub mod features;
pub mod graph;
pub mod infer;
pub mod loss;
pub mod model;
pub mod ops;
pub mod optim;
pub mod params;
pub mod scalar;
pub mod train;

pub use batch::{make_batches, Batch, TrainingPair};
pub use checkpoint::CheckpointInfo;
pub use config::{ConfigFile, RunConfig};
pub use error::{NetError, Result};
pub use features::{FeatureBatch, InputRecord};
pub use graph::{Graph, Var};
pub use infer::{assemble, complete, complete_baseline, greedy_decode, Completion};
pub use loss::{total_loss, LossBreakdown, Targets};
pub use model::{Architecture, CompletionModel, HeadsOutput, ModelConfig};
pub use scalar::Scalar;
pub use train::{train, Phase, TrainConfig, TrainOutputs, TrainReport};
