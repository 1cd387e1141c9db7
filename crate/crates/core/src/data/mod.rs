//! Labeled datasets, the entangled-concept generator, binary I/O and
//! forget/retain task splits.

mod dataset;
mod io;
mod split;
mod synthetic;

pub use dataset::Dataset;
pub use io::{decode_dataset, encode_dataset, load_dataset, save_dataset, DATA_MAGIC, DATA_VERSION};
pub use split::{sample_finetune_retain, split_task, SplitResult, TaskKind, TaskSpec};
pub use synthetic::{gen_synthetic, gen_train_test, SharedGroup, SyntheticSpec};
