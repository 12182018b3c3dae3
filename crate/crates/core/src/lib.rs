//! Long-sequence time-series forecasting with the Informer architecture.
//!
//! The crate is self-contained: a small reverse-mode autodiff engine
//! ([`tensor`]), the layers built on it ([`nn`]), full and ProbSparse
//! attention ([`attention`]), the Informer encoder/decoder plus comparison
//! baselines ([`model`]), a minute-bar market data pipeline ([`data`]),
//! training ([`train`]) and the evaluation harnesses ([`eval`]).

pub mod attention;
pub mod data;
pub mod error;
pub mod eval;
pub mod gradcheck;
pub mod model;
pub mod nn;
pub mod synthetic;
pub mod tensor;
pub mod train;

pub use error::{Error, ErrorClass, Result};
pub use tensor::{no_grad, Tensor};
