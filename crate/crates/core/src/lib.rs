//! Dynamics, simulation and geometric control of a quadrotor carrying a
//! payload on a flexible cable, modelled as `n` serially connected links.
//!
//! - [`manifold`]: hat/vee maps, the SO(3) exponential, S² helpers.
//! - [`dynamics`]: inertia table, both matrix forms of the equations of motion,
//!   energy and momentum.
//! - [`integrator`]: projected RK4/Euler stepping and closed-loop simulation.
//! - [`linear`]: linearization about the hanging equilibrium, controllability.
//! - [`controller`]: the geometric controller and its reduced counterpart.
//! - [`diagnostics`]: link error metrics and the attitude Lyapunov certificate.
//! - [`verification`]: numerical property checks shared by tests and the CLI.

// `!(x > 0.0)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod controller;
pub mod diagnostics;
pub mod dynamics;
pub mod error;
pub mod integrator;
pub mod linalg;
pub mod linear;
pub mod manifold;
pub mod oracle;
pub mod sampling;
pub mod verification;

pub use error::{Error, Result};
