//! Configuration, orchestration and artifacts for `dirac-tails` runs.

pub mod config;
pub mod output;
pub mod run;
pub mod studies;

pub use config::RunConfig;
