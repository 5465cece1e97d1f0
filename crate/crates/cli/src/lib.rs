//! Command-line surface and experiment runners for `adjustkit`.

pub mod commands;
pub mod harness;
