//! Experiment pipelines behind the `gamblers` command.

pub mod cli;
pub mod config;
pub mod output;
pub mod separation;
pub mod verify;
