//! A small numeric kernel for the gait network: tensors, the handful of
//! layers the architecture needs, tape-based reverse-mode gradients, the
//! weighted MSE loss and Adam.
//!
//! Everything is generic over [`Float`] so the same graph runs in `f32` for
//! training and in `f64` for finite-difference gradient checks.

pub mod adam;
pub mod checkpoint;
pub mod graph;
mod kernels;
pub mod network;
pub mod tensor;

pub use adam::{Adam, AdamConfig, AdamState};
pub use checkpoint::{load_checkpoint, read_checkpoint, save_checkpoint, write_checkpoint};
pub use graph::{Gradients, Graph, Var};
pub use network::{Architecture, LayerSpec, ModelState};
pub use tensor::Tensor;

use std::fmt::Debug;
use std::iter::Sum;
use std::ops::{AddAssign, MulAssign, SubAssign};

pub trait Float:
    num_traits::Float + AddAssign + SubAssign + MulAssign + Sum + Default + Debug + Send + Sync + 'static
{
    fn of(v: f64) -> Self;
    fn as_f64(self) -> f64;
}

impl Float for f32 {
    fn of(v: f64) -> Self {
        v as f32
    }
    fn as_f64(self) -> f64 {
        self as f64
    }
}

impl Float for f64 {
    fn of(v: f64) -> Self {
        v
    }
    fn as_f64(self) -> f64 {
        self
    }
}
