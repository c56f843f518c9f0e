//! Experiment runner for `saddle-core`: TOML configs, the `solve` and
//! `verify` commands and the files they write.

pub mod cli;
pub mod config;
pub mod error;
pub mod experiment;
pub mod verify;

pub use config::{Overrides, Plan, Settings};
pub use error::{HarnessError, Result};
pub use experiment::{solve, Output, Prepared};
pub use verify::{verify, VerifyReport};
