//! A self-contained model family for desk-scale runs: a small and a target
//! feed-forward classifier pretrained on a shared synthetic corpus, plus the
//! tasks they are fine-tuned and evaluated on.

pub mod checkpoint;
mod model;
mod task;
mod train;

pub use model::{softmax, Layer, LayerGrad, ParamScope, ToyModel, SMALL_HIDDEN, TARGET_HIDDEN};
pub use task::{
    load_samples, save_samples, Geometry, Mixture, SampleRecord, SyntheticTask, TaskData,
};
pub use train::{finetune, pretrain_family, train, TrainConfig};
