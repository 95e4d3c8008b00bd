//! Fixed-point machinery for enriched Kannan and enriched Bianchini mappings.
//!
//! The crate is organised bottom-up:
//!
//! * [`linalg`]: dense [`Vector`] and [`Matrix`] types over `f64`.
//! * [`mapping`]: the [`MappingSpec`] catalog of self-maps and the averaging
//!   transform `T_λ = (1-λ)I + λT`.
//! * [`convex`]: closed-form nearest-point projections onto boxes, balls,
//!   halfspaces and hyperplanes.
//! * [`certify`]: empirical certification of Banach, Kannan, Bianchini
//!   (plain and enriched) and monotonicity conditions over finite samples.
//! * [`solve`]: the Krasnoselskij iteration engine together with the
//!   a priori / a posteriori error bounds it monitors.
//! * [`apps`]: split feasibility (CQ operator) and variational inequality
//!   solvers built on top of the engine.
//! * [`cli`]: the configuration-driven runner behind the `enriched` binary.

#![allow(clippy::neg_cmp_op_on_partial_ord)] // `!(x > 0.0)` style checks deliberately reject NaN

pub mod apps;
pub mod certify;
pub mod cli;
pub mod convex;
pub mod error;
pub mod export;
pub mod linalg;
pub mod mapping;
pub mod solve;
mod tagged;

pub use crate::error::{Error, Result};
pub use crate::linalg::{Matrix, Vector};
pub use crate::mapping::{norm_dist, MappingSpec};
