//! Neuromorphic attitude estimation for quadrotors.
//!
//! A small recurrent spiking network estimates pitch and roll from 6-DOF IMU
//! streams. The crate also carries the classical filters it is compared
//! against, a quantization-aware trainer for the hardware parameter grid, a
//! particle swarm tuner for the filters and a synthetic IMU simulator.

pub mod dataset;
pub mod domain;
pub mod error;
pub mod eval;
pub mod filters;
pub mod pso;
pub mod quant;
pub mod sim;
pub mod snn;
pub mod train;

pub use error::{Error, Result};
