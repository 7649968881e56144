//! Distributed containers: a one-dimensional array and an N-dimensional
//! matrix, both fixed-size and allocated collectively over a team.

mod array;
mod matrix;

pub use array::{DistributedArray, LocalView};
pub use matrix::{DistributedMatrix, MatrixView};
