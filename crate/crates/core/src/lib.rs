//! DPG and DPG* minimum-residual finite elements for the ultraweak formulation
//! of 2D time-harmonic acoustics.
//!
//! Both methods discretize the same saddle-point problem
//!
//! ```text
//!   (ψ, φ)_V + b(u, φ)   = l(φ)     for all test φ
//!   conj(b(w, ψ))        = g(w)     for all trial w
//! ```
//!
//! DPG puts the load in the first equation (`g = 0`), DPG* puts it in the
//! second (`l = 0`). The crate is organized as:
//!
//! - [`mixed_core`]: the abstract mixed problem in the language of dense
//!   matrices, with the stability identities and estimates it satisfies.
//! - [`mesh`], [`spaces`]: structured quadrilateral meshes, quadrature, nodal
//!   bases and degree-of-freedom layouts.
//! - [`acoustics`]: element assembly of the ultraweak forms, test-norm Gram
//!   matrices and loads for a plane-wave manufactured solution.
//! - [`solver`]: element-wise static condensation, global solve and
//!   back-substitution for either method.
//! - [`lsq`]: weakly conforming least squares and the scaled-norm bridge to DPG*.
//! - [`error_measures`]: error norms, convergence rates, the discrete
//!   boundedness-below constant and goal-orientation checks.
//! - [`experiments`]: drivers for the batch experiments exposed by the CLI.

pub mod acoustics;
pub mod error;
pub mod error_measures;
pub mod experiments;
pub mod linalg;
pub mod lsq;
pub mod mesh;
pub mod mixed_core;
pub mod par;
pub mod solver;
pub mod spaces;

pub use error::{Error, Result};
pub use num_complex::Complex64;
pub use par::Execution;
