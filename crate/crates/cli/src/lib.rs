//! Experiment harness: configuration, instance generators, the experiment
//! commands, output writers and the verification checks.

pub mod aggregate;
pub mod checks;
pub mod commands;
pub mod config;
pub mod instances;
pub mod output;
pub mod ratefit;
pub mod verify;
