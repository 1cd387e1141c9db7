//! Dense tensors, the feed-forward classifier, exact gradients and
//! first-order optimizers.

mod checkpoint;
mod model;
mod optim;
mod tensor;
mod train;

pub(crate) use model::argmax;

pub use checkpoint::{decode_checkpoint, encode_checkpoint, load_checkpoint, save_checkpoint, CKPT_MAGIC, CKPT_VERSION};
pub use model::{log_softmax, softmax, softmax_ce_loss, Activation, Classifier, GradSign, Gradients};
pub use optim::{Optimizer, OptimizerKind};
pub use tensor::Tensor;
pub use train::{train, TrainConfig};
