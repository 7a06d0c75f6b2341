//! Simple adaptive control (SAC) and its closed-loop reference model variant
//! (CL-SAC): LTI algebra, passivity checks and parallel feedforward design,
//! command generator tracker diagnostics, output-error bounds, and a
//! fixed-step simulator with the MAV roll-attitude scenarios built in.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod adaptive_law;
pub mod bounds;
pub mod cgt;
pub mod command;
pub mod config;
pub mod error;
pub mod integrator;
pub mod linalg;
pub mod lti;
pub mod passivity;
pub mod reference_model;
pub mod scenarios;
pub mod sim;
pub mod trace;

pub use error::{Error, Result};
