//! Dense tensors and per-layer forward, backward and cost semantics.

mod adam;
mod layer;
mod tensor;


pub use adam::{adam_step, AdamState};
pub use layer::{backward_layer, forward_layer, madds_of_layer, softmax_in_place, Conv2dSpec, LayerSpec};
pub use tensor::Tensor;
