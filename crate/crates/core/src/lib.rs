//! Particle-filter localization for an underwater vehicle moving through a
//! world of labelled rectangular structures.
//!
//! The filter can weight its particles with either of two measurement
//! models:
//!
//! - a geometric model that compares a simulated range scan against the
//!   scan predicted for each hypothesis by closed-form ray casting, and
//! - a semantic model that compares lists of recognised objects, each given
//!   as a class label with a relative range and bearing.
//!
//! The [`bench`] module rebuilds a block-world scenario and measures how
//! accurate and how expensive the two models are side by side.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bench;
pub mod error;
pub mod filter;
pub mod likelihood;
pub mod sensing;
pub mod world;

pub use error::{Error, Result};
pub use filter::{MotionCommand, MotionNoise, Particle, ParticleSet, StepDiagnostics};
pub use likelihood::{GeometricModel, LikelihoodModel, SemanticModel, SemanticParams};
pub use sensing::{Detection, RangeScan, SemanticObservation, SensorConfig};
pub use world::{MapObject, Point2, Pose2D, Rect, WorldMap};
