//! Bootstrap solver for the Lipkin-Meshkov-Glick model.

pub mod config;
pub mod engine;
pub mod error;
pub mod measures;
pub mod oracles;
pub mod report;
pub mod run;
pub mod solver;
pub mod su2;
