//! Robust semidefinite feasibility over parameter cubes.

pub mod apps;
pub mod cli;
pub mod cube;
pub mod error;
pub mod io;
pub mod mpoly;
pub mod numerics;
pub mod sdp;

pub use error::{Error, Result};
