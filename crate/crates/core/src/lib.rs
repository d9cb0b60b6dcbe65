//! Misiołek curvature of incompressible flows on the surfaces
//! `M_s = { x² + y² = s²(1 − z²) }` and on the central extension of the
//! volume-preserving diffeomorphism group by the cocycle `Ω(X, Y) = ⟨z★X, Y⟩`
//! that models the Coriolis force.
//!
//! Fields are sampled on a Gauss–Legendre × Fourier grid ([`surface::Grid`]);
//! all derivatives are spectral collocation derivatives and all integrals use
//! the matching quadrature.

pub mod curvature;
pub mod error;
pub mod fields;
pub mod io;
pub mod search;
mod spectral;
pub mod surface;


pub use curvature::{ExtendedVector, MCReport};
pub use error::{Error, Result};
pub use fields::{RadialBump, StreamFunction, VectorField, ZonalSpec};
pub use surface::{Grid, ScalarField, SurfaceProfile};
