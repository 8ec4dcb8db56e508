//! Minimal deterministic reverse-mode autodiff over f64 tensors, plus the
//! layers, parameter store, and optimizer shared by the learned components.

pub mod graph;
pub mod layers;
pub mod optim;
pub mod params;
pub mod tensor;

pub use graph::{AttnMask, Ctx, Var};
pub use optim::Adam;
pub use params::{ParamId, ParamStore};
pub use tensor::Tensor;
