//! Minimum-time navigation in a planar current field: convex control sets,
//! current fields, PMP extremals, and the solvers built on them.
//!
//! The geometric kernel (`plane`, `convex`, `currents`, `ode`) is generic over
//! the scalar type; the dynamics and solvers work in `f64` through the aliases
//! below.

pub mod convex;
pub mod currents;
pub mod dynamics;
pub mod ode;
pub mod plane;
#[cfg(test)]
mod properties;
pub mod scalar;
pub mod solvers;

pub use scalar::Scalar;

pub type Vec2 = plane::Vec2<f64>;
pub type Mat2 = plane::Mat2<f64>;
pub type ControlSet = convex::ControlSet<f64>;
pub type PolarCurve = convex::PolarCurve<f64>;
pub type CurrentField = currents::CurrentField<f64>;
pub type RegionBox = currents::RegionBox<f64>;
pub type AnalyticField = currents::AnalyticField<f64>;
