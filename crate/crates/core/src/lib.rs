//! Numerical laboratory for Lorentzian scattering rigidity.
//!
//! Computes scattering relations of lightlike geodesics between timelike
//! boundary hypersurfaces, connecting geodesics and the energy-based defining
//! function of lightlike boundary pairs, light ray transforms, and the
//! reduction of stationary spacetimes to magnetic systems.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod connect;
mod error;
pub mod fields;
pub mod gauge;
pub mod geometry;
pub mod lightray;
pub mod models;
pub mod quadrature;
pub mod scattering;
pub mod stationary;

pub use error::Error;
pub use fields::{CovectorField, Matrix, ScalarField, SymTwoTensorField, Vector};
pub use geometry::{BoundaryHypersurface, GeodesicPath, IntegrationConfig, MetricField};

pub use error::Result;
