//! Emulated antagonistic muscle actuators on desk-scale plants.
//!
//! The numeric core is generic over [`Real`] (`f32` or `f64`); the aliases
//! below fix the scalar for the common cases.

// `!(x > 0)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod actuators;
pub mod error;
pub mod format;
pub mod learn;
pub mod mrloop;
pub mod muscle;
pub mod plant;
pub mod scalar;

pub(crate) use error::invalid;
pub use error::{Error, Result};
pub use scalar::Real;

pub type MuscleParamsF64 = muscle::MuscleParams<f64>;
pub type MuscleParamsF32 = muscle::MuscleParams<f32>;
pub type MuscleGeometryF64 = muscle::MuscleGeometry<f64>;
pub type MuscleGeometryF32 = muscle::MuscleGeometry<f32>;
pub type MuscleStateF64 = muscle::MuscleState<f64>;
pub type MuscleStateF32 = muscle::MuscleState<f32>;
pub type JointControllerF64 = actuators::JointController<f64>;
pub type JointControllerF32 = actuators::JointController<f32>;
pub type PlantModelF64 = plant::PlantModel<f64>;
pub type PlantModelF32 = plant::PlantModel<f32>;
pub type PlantStateF64 = plant::PlantState<f64>;
pub type PlantStateF32 = plant::PlantState<f32>;
pub type EnvSetupF64 = learn::env::EnvSetup<f64>;
pub type EpisodeTraceF64 = mrloop::EpisodeTrace<f64>;
