//! Numerical laboratory for the distributed-delay equation
//!
//! ```text
//! b(t) = (1/eps) * integral over s in [1 - eps/2, 1 + eps/2] of f(b(t - s)) ds
//! ```
//!
//! Continuations are computed by the method of steps on grids where the
//! window endpoints are nodes. On top of the integrator sit zero-crossing
//! analysis and the first-return map ([`oscillation`]), the eigenfunction
//! barriers that bound the invariant set of initial data ([`barriers`]), the
//! small-window limit against a square wave ([`limit`]) and the reduction of
//! an age-structured population model ([`gurtin`]).

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod barriers;
pub mod error;
pub mod grid;
pub mod gurtin;
pub mod limit;
pub mod nonlinearity;
pub mod oscillation;
pub mod quadrature;
pub mod roots;
pub mod trajectory;

pub use error::{Error, Result};
pub use grid::{default_m, make_default_grid, make_grid, Grid};
pub use nonlinearity::{FeedbackReport, Kind, NonlinearitySpec};
pub use trajectory::{extend, InitialData, Side, Trajectory};
