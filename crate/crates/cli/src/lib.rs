//! Library side of the `hamnav` binary.

pub mod commands;
pub mod config;
pub mod serve;
