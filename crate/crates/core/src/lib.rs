//! Numerical laboratory for the degenerate dispersive KdV equation
//!
//! ```text
//! u_t + (u (u u_x)_x + mu u^3)_x = 0,   mu in {-1, 0, 1}
//! ```
//!
//! in its Eulerian, Lagrangian and flattened formulations.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod analysis;
pub mod coordinates;
pub mod error;
pub mod evolution;
pub mod grid;
pub mod interp;
pub mod jet;
pub mod linear_models;
pub mod profiles;

pub use error::{Error, Result};
pub use grid::{Field, Grid};
