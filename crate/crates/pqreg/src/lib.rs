//! Experiment drivers, file formats and the command line for the
//! `pqreg-core` numerics.

pub mod cli;
pub mod config;
pub mod experiments;
pub mod io;
