//! Minimal reverse-mode differentiation over dense `f64` tensors, the
//! partially shared two-branch encoder built on it, an adaptive-moment
//! optimizer and a finite-difference gradient checker.

pub mod checkpoint;
pub mod error;
pub mod gradcheck;
pub mod graph;
pub mod input;
pub mod model;
pub mod optim;
pub mod tensor;

pub use error::{NnetError, Result};
pub use gradcheck::{grad_check, GradCheck};
pub use graph::{Gradients, Graph, Var};
pub use model::{Branch, Model, ModelConfig, ModelVars, ParamStore};
pub use optim::{backward_and_step, Adam, AdamConfig};
pub use tensor::Tensor;
