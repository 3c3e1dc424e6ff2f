//! Dense forward/backward kernel: the handful of primitives the component
//! networks need, each with an analytic gradient.

mod rng;
mod tape;
mod tensor;

pub use rng::{stream, RngSnapshot, RngState};
pub use tape::{Gradients, ParamId, ParamStore, Tape, Var};
pub use tensor::Tensor2;

