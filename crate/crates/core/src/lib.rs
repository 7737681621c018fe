#![allow(clippy::neg_cmp_op_on_partial_ord)]

//! Simulation, question generation, program execution and state estimation
//! for dynamic-scene question answering over rigid vehicles.

pub mod model;
pub mod physics;
pub mod generator;
pub mod program;
pub mod executor;
pub mod estimator;
pub mod questions;
pub mod parser;
pub mod dataset;

pub use model::*;
