//! Flow tensors, time integration, and the D and Harnack expressions.

pub mod checks;
pub mod export;
pub mod harnack;
pub mod integrator;
pub mod solution;
pub mod spec;
pub mod state;
pub mod stensor;

pub use harnack::TensorJet;
pub use integrator::{evolve, step, EvolveOptions};
pub use solution::{Backend, Snapshot, SpacetimeSolution};
pub use spec::{AlphaSchedule, FlowSpec, FlowVariant};
pub use state::FlowState;
pub use stensor::s_tensor;
