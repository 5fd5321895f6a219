//! Behavioral simulator and toolkit for SRAM-undervolting true random
//! number generation.
//!
//! The crate models voltage-dependent SRAM access failures as an entropy
//! source, characterizes per-row Shannon entropy across operating points,
//! runs the read-accumulate / SHA-256 TRNG pipeline, checks output quality
//! with a NIST SP 800-22-style test subset, evaluates closed-form
//! throughput/energy/latency models, and schedules generation into cache
//! idle intervals with a trace-driven simulator.

pub mod bitstream;
pub mod cache;
pub mod calibrate;
pub mod characterize;
pub mod config;
mod error;
pub mod fault;
pub mod perf;
pub mod rng;
pub mod sts;
pub mod trng;

pub use error::{Error, Result};
