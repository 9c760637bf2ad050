pub mod asymptotic;
pub mod checks;
pub mod config;
pub mod diagnostics;
pub mod error;
pub mod experiments;
pub mod grid;
pub mod kernels;
pub mod minimizers;
pub mod pairs;
pub mod quad;
pub mod simulator;
