//! Batch orchestration behind the command-line driver.

pub mod check;
pub mod config;
pub mod report;
pub mod sweep;

pub use check::{run_checks, CheckOutcome};
pub use config::{AlgorithmTemplate, EtaSpec, GameSpec, InitSpec, OutputFormat, SweepSpec};
pub use sweep::{run_sweep, SweepResult, SweepRow};
