//! Finite element building blocks and solvers for a fluid (Stokes) or heat
//! strip coupled to an elastic (wave) strip across flat interfaces.
//!
//! The discrete monolithic problem is advanced with Crank–Nicolson; a dynamic
//! Ritz projection and convergence tooling sit on top.

// `!(x > 0.0)` deliberately rejects NaN; element loops index several arrays at once.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop, clippy::too_many_arguments)]

pub mod analysis;
pub mod basis;
pub mod dofspace;
pub mod error;
pub mod exec;
pub mod experiments;
pub mod forms;
pub mod fsi_cn;
pub mod linalg;
pub mod manufactured;
pub mod mesh;
pub mod ritz;

pub use error::{Error, Result};
pub use exec::Exec;
