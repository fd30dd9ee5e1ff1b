//! Multi-level sketched preconditioning (MSP) for linear systems.
//!
//! The crate solves `(A + λI) x = b` for PSD `A` and `(AᵀA + λI) x = c` for general `A`
//! with a coarse Nyström preconditioner built from a sparse sketch. The preconditioner
//! is never inverted exactly: each application is itself an inner preconditioned
//! Lanczos solve, preconditioned in turn by a small sketched factorization. The outer
//! iteration is a left-preconditioned Lanczos method that tolerates this inexactness.
//!
//! Module map:
//! * [`linalg`]: dense/CSR matrices, the operator trait, factorizations, spectra.
//! * [`sketch`]: sparse embeddings and oblivious subspace embeddings.
//! * [`nystrom`]: the coarse preconditioner and its regularized inversion formula.
//! * [`lanczos`]: inexact preconditioned Lanczos and its symmetric reference.
//! * [`psd`]: the two-level solver for PSD systems.
//! * [`general`]: the three-level solver for normal-equation systems.
//! * [`apps`]: kernel ridge regression, least squares, the ridge black box, trace estimation.
//! * [`harness`]: instance generators, solver comparison and self-test.
//! * [`cli`]: the `msp` command line.

pub mod apps;
pub mod cli;
pub mod config;
pub mod error;
pub mod general;
pub mod harness;
pub mod io;
pub mod lanczos;
pub mod linalg;
pub mod nystrom;
pub mod psd;
pub mod report;
pub mod rng;
pub mod sketch;

pub use config::MspConfig;
pub use error::{MspError, Result};
pub use general::{solve_normal, solve_square, GeneralSolveConfig, NormalSolver};
pub use linalg::{CsrMatrix, DenseMatrix, LinearOperator, Matrix};
pub use psd::{solve_psd, PsdSolveConfig, PsdSolver};
pub use report::{SolveReport, SolveStatus};
