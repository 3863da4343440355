//! L-geodesics: discretized paths, direct minimization, shooting, reduced
//! distance fields and their pointwise checks.

pub mod checks;
pub mod distance;
pub mod minimize;
pub mod path;
pub mod pathfield;
pub mod shoot;

pub use distance::{frozen_distance_squared, reduced_distance_field, reduced_distance_series, FieldOptions, ReducedDistanceField};
pub use minimize::{minimize, MinimizeOptions, MultiStart};
pub use path::{GeodesicResult, LPath, Problem};
pub use pathfield::PathField;
pub use shoot::shoot;
