//! Finite cell discretization of the Poisson problem on polygonal domains with
//! tensor-product B-splines and a least-squares stabilized Nitsche method.

pub mod analysis;
pub mod assembly;
pub mod error;
pub mod geometry;
pub mod harness;
pub mod point;
pub mod quadrature;
pub mod solve;
pub mod scalar;
pub mod spline;

pub use error::{FcmError, Result};
pub use scalar::Real;

/// Double-precision aliases.
pub type Point = point::Vec2<f64>;
pub type Grid = spline::BackgroundGrid<f64>;
pub type Polygon = geometry::DomainPolygon<f64>;
pub type Space = spline::TensorSplineSpace<f64>;
pub type Params = assembly::MethodParams<f64>;
pub type System = assembly::SparseSymSystem<f64>;
pub type Disc = assembly::Discretization<f64>;
