//! Nominal biped half-step synthesis, on-line gait modification
//! (turning, time scaling, step extension, static compensation) and
//! zero-moment-point balance evaluation for a 20-joint mechanism.

// Negated comparisons in this crate are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dynamics;
pub mod error;
pub mod gait;
pub mod kinematics;
pub mod model;
pub mod modification;
pub mod report;
pub mod scenario;
pub mod stability;
pub mod sweep;

pub use error::{GaitError, Result};
