//! Configuration, result files, gradient dumps and plots.

pub mod config;
pub mod dump;
pub mod svg;
pub mod table;
