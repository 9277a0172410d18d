//! Attitude determination from weighted vector observations (Wahba's
//! problem) over quaternion coordinates, with the machinery to certify the
//! local convexity of the loss.
//!
//! - [`quat`]: homogeneous quaternion DCM and its first and second partials.
//! - [`model`]: loss, residuals, Jacobian, gradient and analytic Hessian.
//! - [`spectral`]: symmetric 4×4 Jacobi eigensolver, definiteness classes and
//!   the `4‖q‖² − 4 ≤ λ ≤ 12‖q‖² + 4` eigenvalue bounds.
//! - [`davenport`]: q-method closed-form solution, used as an oracle.
//! - [`optim`]: GDA / GNA / LMA iterations with optional normalization.
//! - [`sim`]: seeded synthetic data and the reference single-pair case.
//! - [`formats`], [`cli`], [`verify`]: file formats and the `wahba` binary.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod davenport;
pub mod error;
pub mod formats;
pub mod model;
pub mod optim;
pub mod quat;
pub mod sim;
pub mod spectral;
pub mod verify;

pub use error::{Error, Result};
pub use model::{ObservationPair, ObservationSet, SymMatrix4};
pub use quat::{Quaternion, UnitQuaternion};
