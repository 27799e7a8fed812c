//! Generalized Elastic Net (gEN) for strongly correlated Gaussian designs.
//!
//! The crate is `no_std` (it needs `alloc`) and holds the numerical pieces:
//!
//! * [`linalg`]: dense symmetric eigendecomposition, matrix square roots, solves.
//! * [`simulate`]: the block-correlated covariance model and Gaussian datasets.
//! * [`solvers`]: Lasso, Elastic Net and gEN by coordinate descent, with a KKT check.
//! * [`conditions`]: IC / EIC / GIC criteria, the eigenvalue quantities bounding the
//!   sign-consistency theorem, and the finite-sample events that imply sign recovery.
//! * [`metrics`]: TPR / FPR and best-cell selection.
//! * [`experiments`]: replication units for the three simulation protocols.
//!
//! File formats, the CLI and the parallel runner live in the `gen-en` crate.
#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod conditions;
pub mod error;
pub mod experiments;
pub mod linalg;
pub mod metrics;
pub mod simulate;
pub mod solvers;

pub use error::{Error, Result};
pub use linalg::{EigenDecomposition, Matrix, SymMatrix};
