//! equilab-core: numerics for equidistribution of dilating sets.
//!
//! The crate covers two settings. On flat tori, pushforwards of a measure
//! under dilation and projection are analyzed through the Fourier transform
//! of the measure (discrepancy series, decay along integral rays, rate fits).
//! On compact hyperbolic surfaces, geodesic translates of homogeneous curves
//! in the unit tangent bundle are computed over a concrete cocompact lattice
//! (the Bolza octagon group), together with the second-order ODE machinery
//! that yields the asymptotic expansion of the translate averages.

pub mod bessel;
pub mod error;
pub mod fit;
pub mod fuchsian;
pub mod jet;
pub mod measures;
pub mod ode;
pub mod quad;
pub mod sl2;
pub mod torus;
pub mod translates;

pub use error::{CoreError, Result};
