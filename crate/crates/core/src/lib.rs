//! Exact, chart-local engine for the formal model of Berezin-Toeplitz
//! quantization.
//!
//! Everything is computed at the coordinate origin of one holomorphic chart:
//! smooth functions are truncated Taylor jets with Gaussian-rational
//! coefficients and formal objects are truncated Laurent series in `ν`.
//!
//! Layers, bottom up:
//! - [`scalar`], [`mono`], [`jet`], [`nu`], [`diffop`]: the arithmetic kernel.
//! - [`geometry`]: metric data, potentials on `TM`, top wedge powers.
//! - [`symbol`]: normal-ordered symbols on `TU` and the product `*_h`.
//! - [`star`]: star products with separation of variables, Berezin
//!   transforms, dual products and canonical trace densities.
//! - [`groupoid`]: the fibrewise Fourier dictionary, source and target maps
//!   and the diagonal model.
//! - [`toeplitz`]: the idempotent `ε`, the bullet product and Toeplitz
//!   elements.
#![no_std]

extern crate alloc;

pub mod check;
pub mod diffop;
pub mod geometry;
pub mod groupoid;
pub mod jet;
pub mod mono;
pub mod nu;
pub mod scalar;
pub mod star;
pub mod symbol;
pub mod toeplitz;

mod error;

pub use diffop::{diffop_exp, DiffOp, Grading, NuOp};
pub use error::Error;
pub use geometry::ChartGeometry;
pub use jet::{Jet, EXACT};
pub use mono::{Mono, VarKind, VarMask, VarSet};
pub use nu::{Nu, NuJet};
pub use scalar::Scalar;
