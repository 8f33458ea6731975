//! Dense linear algebra, activations and keyed random streams.

mod matrix;
mod rng;

pub(crate) use matrix::softmax_into;
pub use matrix::{affine_transposed, argmax, axpy, dot, softmax, tanh_map, Matrix};
pub(crate) use rng::check_probability;
pub use rng::{bernoulli_stream, KeyStream, Purpose, RngKey};
