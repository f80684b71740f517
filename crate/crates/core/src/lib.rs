//! Balanced truncation of Itô-type stochastic linear systems
//! `dx = Ax dt + Σⱼ Nⱼx dwⱼ + Bu dt`, `y = Cx`.
//!
//! Type I uses the generalized Lyapunov equations for both Gramians; type II
//! replaces the reachability equation by a linear matrix inequality, which
//! yields an H∞ error bound of twice the sum of truncated singular values.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod balancing;
pub mod error;
pub mod gramians;
pub mod hinf;
pub mod linalg;
pub mod lyapunov;
pub mod sim;
pub mod system;

pub use error::{Error, Result};
pub use linalg::{Matrix, SymMatrix};
pub use system::StochasticSystem;
