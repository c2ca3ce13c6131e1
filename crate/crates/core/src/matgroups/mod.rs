//! Matrices over F_q, group descriptors, literal generator pairs and closure oracles.

pub mod closure;
pub mod descriptor;
pub mod matrix;
pub mod generators;

pub use descriptor::{Family, Flavor, GroupDescriptor, Kind};
pub use matrix::Matrix;
