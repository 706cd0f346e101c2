//! Moment formulas for Markov additive processes and Markov-modulated
//! generalized Ornstein-Uhlenbeck processes, with a Monte Carlo oracle.

pub mod error;
pub mod linalg;
pub mod model;
pub mod numeric;

pub use error::{Error, Result};
pub mod map_moments;
pub mod mmgou;
pub mod mc;
