//! Boundary null controls for the heat equation on `(0, 1)` with a Dirichlet
//! control at `x = 0` and a Wentzell (dynamic) boundary condition at `x = 1`:
//!
//! ```text
//! u_t = u_xx,   u(0,t) = f(t),   a u_xx(1,t) + d u_x(1,t) − b u(1,t) = 0,   a·d > 0.
//! ```
//!
//! Two independent routes compute controls:
//!
//! - [`moment`]: expansion over the eigenparameter Sturm–Liouville spectrum
//!   ([`spectral`]) and numerically constructed biorthogonal families;
//! - [`hum`]: the penalized HUM functional minimized by conjugate gradients on
//!   top of the method-of-lines solvers in [`pde`].
//!
//! [`experiments`] wires both into reproducible runs and a CLI.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod compensated;
pub mod error;
pub mod experiments;
pub mod hum;
pub mod moment;
pub mod pde;
pub mod quadrature;
pub mod spectral;

pub use error::{Error, Result};
pub use pde::{Control, Grid, Model, SchemeOptions, State, Trajectory};
pub use spectral::{EigenKind, Eigenpair, Regime, WentzellParams};
