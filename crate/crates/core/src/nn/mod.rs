//! Teacher and student networks, checkpoints and the distillation loop.

pub mod checkpoint;
pub mod data;
pub mod fitness;
pub mod network;
pub mod optimizer;
pub mod teacher;
pub mod train;

pub use checkpoint::{Checkpoint, CheckpointMetadata};
pub use data::{gaussian_blobs, split_dataset, BlobSpec, Dataset, Splits};
pub use fitness::{candidate_pool, decode_genome, genome_spec, ProxyDistill};
pub use network::{
    ConvSpec, ForwardCache, InputShape, NetKind, Network, NetworkSpec, Scalar, Tensor,
};
pub use optimizer::{Optimizer, OptimizerKind};
pub use teacher::{Region, SyntheticTeacher, Teacher};
pub use train::{
    accuracy, train_distill, train_teacher, EpochRecord, History, TrainConfig, TrainOutcome,
    Trainer,
};
