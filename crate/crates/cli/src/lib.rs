//! Experiment harness around `altmin`: instance construction, the VLS/ELS
//! comparison, failure-fraction sweeps, threshold estimates and plotting.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod config;
pub mod experiments;
pub mod svg;
pub mod threshold;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] altmin::Error),
    #[error("{0}")]
    Usage(String),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
}
