#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod calibration;
pub mod collision;
pub mod error;
pub mod evaluation;
pub mod events;
pub mod ground;
pub mod kinematics;
pub mod pipeline;
pub mod smoothing;

pub use error::{Error, Result};
