//! Gibbs point processes, the random Schrödinger operators they drive, and
//! Monte Carlo estimation of the low-energy tail of the integrated density
//! of states.

pub mod combinat;
pub mod error;
mod extreal;
pub mod geometry;
pub mod gfunc;
pub mod ids;
pub mod operator;
pub mod parallel;
pub mod pointproc;
pub mod potential;
pub mod sampler;
pub mod stats;

pub use error::{Error, Result};
pub use geometry::{Configuration, Cube, Point};
pub use parallel::Exec;
pub use pointproc::{InteractionModel, PairPotential};
