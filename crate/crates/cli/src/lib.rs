//! Scenario runner for scatterlab: JSON configs in, JSON reports out.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod error;
pub mod experiments;
pub mod report;
pub mod runner;
pub mod scenario;

pub use config::Config;
pub use error::Fault;
pub use report::Report;
pub use runner::{run, Command};
