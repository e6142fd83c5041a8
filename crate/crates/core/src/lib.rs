//! Elasticity-based mesh morphing onto non-parameterized target shapes,
//! with POD reduced-order models and Gaussian-process regression.
//!
//! The high-fidelity algorithm iterates `x <- x + gamma * u`, where `u`
//! solves a regularized linear-elasticity problem on the current morphed
//! mesh driven by the mismatch between the morphed boundary and the target.
//! Training morphings are compressed by snapshot POD; new targets are then
//! registered with explicit updates of the POD coordinates only.

pub mod distfield;
pub mod error;
pub mod fem;
pub mod geom;
pub mod instrument;
pub mod mesh;
pub mod morph;
pub mod regress;
pub mod rom;

pub mod codec;
pub mod dense;

pub use error::{Error, Result};
pub use geom::Vec2;
