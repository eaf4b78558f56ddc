//! Forward modelling and inversion for the wave equation with a radial
//! damping coefficient, a point source at the origin and a receiver at the
//! same point.
//!
//! The measured field splits into a singular wavefront carried by the
//! attenuation factor `R` and a smooth remainder `v` behind the cone. The
//! crate computes the ray geometry of that split ([`profiles`]), marches the
//! characteristic boundary value problem for `w = r·v` ([`goursat`]), checks
//! everything against the constant-damping closed form ([`oracle`]),
//! evaluates the adjoint integral identity term by term ([`identity`]) and
//! reconstructs the damping profile from the receiver trace ([`inversion`]).
//!
//! The numerical core is generic over [`Scalar`] (`f32` or `f64`); the
//! aliases at the crate root fix it to `f64`, which is what every tolerance
//! in the test suite assumes.
//!
//! Sign convention: the damped operator is `u_tt − Δu + q(x)·u_t`, i.e. a
//! positive `q` dissipates energy and `R = exp(−t·k/2)` decays.

// `!(x > 0)` is the idiom here for rejecting NaN along with the bad range.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod goursat;
pub mod identity;
pub mod inversion;
pub mod oracle;
pub mod profiles;
pub mod quadrature;
mod scalar;

pub use error::{Error, Result};
pub use goursat::{SolverConfig, Trace, WaveField};
pub use identity::IdentityBreakdown;
pub use inversion::{InversionConfig, InversionReport};
pub use profiles::{ConeData, RadialProfile};
pub use scalar::Scalar;

/// Damping profile in double precision.
pub type Profile64 = RadialProfile<f64>;
/// Characteristic-grid field in double precision.
pub type Field64 = WaveField<f64>;
/// Receiver trace in double precision.
pub type Trace64 = Trace<f64>;
/// Identity breakdown in double precision.
pub type Breakdown64 = IdentityBreakdown<f64>;
/// Solver configuration in double precision.
pub type SolverConfig64 = SolverConfig<f64>;
