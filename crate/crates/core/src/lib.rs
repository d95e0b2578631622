pub mod autodiff;
pub mod error;
pub mod gmm;
pub mod io;
pub mod metrics;
pub mod nn;
pub mod objectives;
pub mod rng;
pub mod runner;
pub mod tensor;

pub use error::{Error, Result};
pub use tensor::Tensor;
