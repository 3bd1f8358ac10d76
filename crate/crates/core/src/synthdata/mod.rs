//! Procedural datasets, built-in parent architectures and a small trainer.

mod dataset;
mod generate;
mod presets;
mod train;


pub use dataset::{load_dataset, save_dataset, Dataset, Split};
pub use generate::{gen_images, gen_tabular, TabularTask, IMAGE_SIDE, MAX_IMAGE_CLASSES};
pub use presets::{mlp, preset_parents, Preset};
pub use train::{argmax, count_correct, cross_entropy, evaluate_accuracy, train_parent, TrainConfig, TrainOutcome};
