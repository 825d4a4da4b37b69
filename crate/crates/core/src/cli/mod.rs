//! Configuration files, experiment execution and CSV output for the
//! `fasuav` binary.

pub mod config;
pub mod runner;

pub use config::{parse_config, render, AnalysisConfig, Command, ExperimentSpec, SweepAxes};
pub use runner::{compute, config_hash, run, RunReport, Table};
