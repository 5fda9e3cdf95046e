//! Fixtures, random scenario generation, batch experiments and reproduction
//! of the published tables.

pub mod fixtures;
pub mod generator;

pub use generator::{generate_scenario, GeneratorConfig};
pub mod experiment;

pub use experiment::{
    evaluate_run, read_csv, run_batch, write_csv, BatchOutput, BatchSummary, RunOptions, RunRecord,
};
pub mod reproduce;

pub use reproduce::{reproduce, Report, Target};
