//! Runge-Kutta quadrature for low-rank gramian factors of stable SISO systems,
//! approximate balanced truncation built on those factors, and tools that
//! check which moments the reduced model matches.

#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod balancer;
pub mod bundled;
pub mod cli;
pub mod error;
pub mod gramian_quadrature;
pub mod json;
pub mod linalg;
pub mod matrix_market;
pub mod shifted_solver;
pub mod sparse;
pub mod system_model;
pub mod tableau;

pub use error::{Error, Result};
