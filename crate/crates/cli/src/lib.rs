//! Configuration, orchestration and dumps for the `lamina` binary.

pub mod checks;
pub mod commands;
pub mod config;
pub mod dump;
pub mod report;
