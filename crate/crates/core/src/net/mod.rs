//! The de-limiter network: configuration, model, checkpoints, training and
//! inference.

mod checkpoint;
mod config;
mod infer;
mod model;
mod train;

pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub use config::{receptive_field, Head, NetConfig};
pub use infer::{activation_bytes, delimit, infer, InferOptions, CHUNK_SECONDS, DEFAULT_TARGET_LUFS};
pub use model::{buffer_layout, build_model, param_layout, Model, ParamSpec, RunningStats, Traced, BN_MOMENTUM};
pub use train::{evaluate_si_sdr, split_indices, stack, train, unstack, LogEntry, Pair, TrainHyper, TrainOutcome};
