//! Desk-scale harmonic analysis on a uniform 2-D grid: rough singular
//! integrals, their maximal and sparse bounds, Orlicz averages, Muckenhoupt
//! weights and the Calderón–Zygmund decomposition.

pub mod czd;
pub mod dyadic;
pub mod error;
pub mod grid;
pub mod kernel;
pub mod operators;
pub mod orlicz;
pub mod sparse;
pub mod verify;
pub mod weights;

pub use error::{Error, Result};
