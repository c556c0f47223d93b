//! Reachable sets of linear control systems as centrally symmetric convex
//! bodies, Banach-Mazur shape distances between them, and the small-time
//! limit shapes of those sets.

// negated float comparisons deliberately send NaN down the rejecting branch
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod brunovsky;
pub mod convex_bodies;
pub mod error;
pub mod lab;
pub mod limit_shape;
pub mod linalg;
pub mod linear_systems;
pub mod reachable;

pub use error::{Error, Result};
