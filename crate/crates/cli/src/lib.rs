//! Experiment driver for the plateau toolkit: configures and runs the three
//! competing solution methods, persists records, tables and plots.

pub mod runner;
