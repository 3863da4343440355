//! Discrete Riemannian calculus on periodic grids and the analytic sphere.

pub mod covariant;
pub mod curvature;
pub mod field;
pub mod grid;
pub mod integrate;
pub mod interp;
pub mod linalg;
pub mod sphere;
pub mod stencil;

pub use covariant::CovOps;
pub use curvature::{curvature, CurvatureBundle, NodeGeometry};
pub use field::{metric_inverse, Field, MetricField, ScalarField, SymTensorField, VectorField};
pub use grid::{Grid, GridKind};
pub use integrate::integrate;
