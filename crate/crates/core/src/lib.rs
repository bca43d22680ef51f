//! Finite-time hyperbolic coordinates for planar maps.
//!
//! The crate computes the most contracted and most expanded directions of
//! derivative cocycles along orbits, checks quasi-hyperbolicity
//! certificates with explicit constants, and verifies the convergence and
//! slow-variation inequalities those certificates imply.

pub mod bounds;
pub mod certificate;
pub mod cli;
pub mod cocycle;
pub mod config;
pub mod error;
pub mod fixtures;
pub mod foliation;
pub mod frame;
pub mod linalg;
pub mod maps;
pub mod oracle;
pub mod report;

pub use error::{Error, Result};
pub use linalg::{Mat2, Vec2};
