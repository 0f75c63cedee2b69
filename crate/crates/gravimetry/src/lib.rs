//! Forward and inverse gravimetry for compact deposit bodies.
//!
//! The direct problem sums the vertical gravity intensity `V_z` of bodies
//! assembled from elementary vertical bars; the inverse problem models each
//! body as a homogeneous spheroid (ellipsoid of revolution about the vertical
//! axis) and recovers its parameters from surface measurements in three
//! stages:
//!
//! 1. [`detect`] — locate anomaly peaks on a gridded field and decide how
//!    many bodies are resolvable,
//! 2. [`bulakh`] — closed-form initial depth and mass estimates under a
//!    homogeneous-sphere assumption,
//! 3. [`invert`] — box-constrained coordinate descent on a Tikhonov
//!    smoothing functional with decrementally narrowed constraints.
//!
//! # Units
//!
//! Lengths are km, densities g/cm³ (numerically equal to 10⁹ t/km³), masses
//! 10⁹ t, and intensities mGal (10⁻⁵ m/s²). In these units the gravitational
//! constant is [`model::GAMMA`] ≈ 6.674 mGal·km²/10⁹ t, whose reciprocal is
//! the familiar 0.15 of practical depth-mass rules.

pub mod bulakh;
pub mod detect;
pub mod error;
pub mod forward;
pub mod invert;
pub mod model;
pub mod synth;

pub use error::Error;
pub use forward::{Body, FieldGrid};
pub use invert::{InversionResult, ParameterBox};
pub use model::{BarBody, BarCell, Spheroid, Station};
pub use synth::Scenario;

/// Crate-wide result type.
pub type Result<T> = std::result::Result<T, Error>;
