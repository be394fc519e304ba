//! C-regularized distribution semigroups and cosine functions built from
//! finite-dimensional model operators, together with almost-periodicity
//! analysis of their orbits and a catalogue of numerical checks.

pub mod apanalysis;
pub mod cli;
pub mod linalg;
pub mod modelops;
pub mod quad;
pub mod semigroup;
pub mod testfn;
pub mod trajectory;
pub mod verify;

pub use linalg::{c64, CMat, CVec};
