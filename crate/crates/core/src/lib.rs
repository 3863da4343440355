//! Numerical laboratory for metrics evolving by `∂t g = −2S`: flows,
//! L-geodesics, reduced distances and reduced volumes, with checkers for the
//! associated Harnack-type identities and the monotonicity of reduced volume.

pub mod config;
pub mod error;
pub mod flows;
pub mod geometry;
pub mod lgeo;
pub mod orientation;
pub mod report;
pub mod runner;
pub mod volume;

pub use error::{Error, Result};
pub use orientation::{Mode, TimeOrientation};
pub use report::{IdentityReport, Verdict};
