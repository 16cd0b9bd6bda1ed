//! Numerical analysis of sonic interfaces.
//!
//! * [`phase_plane`] and [`profile_1d`]: transonic profiles of the steady
//!   one-dimensional Euler-Poisson system integrated through the sonic point.
//! * [`keldysh_model`]: a degenerate model equation of Keldysh type whose
//!   sonic boundary is a weak discontinuity.
//! * [`mixed_type_2d`]: the linearized elliptic-hyperbolic operator on a
//!   channel around an accelerating profile.
//! * [`shock_polar`]: steady potential-flow shock polar and the
//!   self-similar pseudo-sonic geometry.

pub mod error;
pub mod field;
pub mod keldysh_model;
pub mod mixed_type_2d;
pub mod io;
pub mod numerics;
pub mod phase_plane;
pub mod profile_1d;
pub mod shock_polar;

pub use error::{Error, Result};
