//! Momentum Iterative Hessian Sketch (M-IHS) solvers for ℓ2-regularized least
//! squares,
//!
//! ```text
//!     x* = argmin_x ‖Ax − b‖² + λ‖x‖²,
//! ```
//!
//! together with the randomized embeddings they are built on, the `AᵀA`
//! Krylov sub-solver used by the inexact schemes, statistical-dimension
//! estimation, synthetic problem generation and an analytic flop model.
//!
//! The crate is `no_std` and only needs `alloc`. File formats, the experiment
//! runner and the command line live in the `mihs-bench` crate.
//!
//! Matrices are stored column-major (see [`linalg::DenseMatrix`]).
#![no_std]
#![warn(missing_debug_implementations)]
// `!(x > 0.0)` rejects NaN along with the out-of-range values
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod clock;
pub mod error;
pub mod estimate;
pub mod flops;
pub mod linalg;
pub mod problems;
pub mod rng;
pub mod sketch;
pub mod solvers;
pub mod subsolver;

mod math;

pub use clock::{Clock, NoClock};
pub use error::{Error, Result};
pub use flops::{FlopCategory, FlopCounter};
pub use linalg::DenseMatrix;
pub use problems::Problem;
pub use rng::RngState;
pub use sketch::{SketchKind, SketchOperator};
