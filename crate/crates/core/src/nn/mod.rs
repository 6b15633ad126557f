//! Minimal dense numeric core: tensors, the layer set used by the two
//! generative models, Adam, seeded RNG, gradient checking, and checkpoints.

pub mod adam;
pub mod checkpoint;
pub mod gradcheck;
pub mod layers;
pub mod rng;
pub mod tensor;

pub use adam::AdamState;
pub use checkpoint::{read_checkpoint, write_checkpoint, Checkpoint};
pub use layers::{Activation, ActivationLayer, BatchNorm2d, Conv2d, Deconv2d, Linear, Param};
pub use rng::SeededRng;
pub use tensor::Tensor;
