//! Logarithmic signatures for finite orthogonal groups over fields of odd
//! characteristic.

pub mod arith;
pub mod cli;
pub mod error;
pub mod fields;
pub mod forms;
pub mod matgroups;
pub mod factorize;
pub mod lscore;
pub mod pgm;
pub mod spreads;

pub use error::{MlsError, Result};
