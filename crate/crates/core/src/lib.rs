//! Complex-valued composite optimization: a generalized Krylov subspace
//! solver for `min 0.5 ||A x - y||^2 + f(x)` over an optional convex
//! constraint, with quasi-Newton proximal (CQNPM) and accelerated proximal
//! gradient (APG) reference solvers.
//!
//! Modules:
//! - [`vector`], [`hermitian`], [`basis`]: complex vector algebra, small
//!   dense Hermitian solves, incremental orthonormalization.
//! - [`operators`]: dense / masked-Fourier / convolution forward operators
//!   with verified adjoints.
//! - [`regularizers`]: smooth priors with gradients and Lipschitz metadata.
//! - [`metric`]: the self-scaling Hermitian rank-1 Hessian surrogate.
//! - [`solver`]: the subspace solver, reference solvers, and per-iteration
//!   records.

pub mod basis;
pub mod error;
pub mod hermitian;
pub mod metric;
pub mod operators;
pub mod regularizers;
pub mod solver;
pub mod vector;

pub use error::{Error, Result};
pub use num_complex::Complex64;
pub use operators::ForwardOperator;
pub use regularizers::{Denoiser, SmoothRegularizer};
pub use solver::{Problem, SolverConfig, SolverMode, SolverState};
pub use vector::{inner, re_inner, ComplexVector};
