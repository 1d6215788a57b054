//! Library face of the benchmark CLI, exposed so integration tests can drive
//! the command layer directly. The binary in `main.rs` is a thin wrapper.

pub mod commands;
pub mod config;
