//! Conditioned dynamics, homodyne records and online state estimation for a
//! Bose-Einstein condensate in a double well under continuous measurement of
//! the atom-number imbalance.

pub mod dynamics;
pub mod error;
pub mod harness;
pub mod observables;
pub mod rng;
pub mod spinspace;

pub use error::{Error, Result};
