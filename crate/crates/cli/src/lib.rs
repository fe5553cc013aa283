//! Command-line front end for the H-LPS simulator: scenario configuration
//! files, subcommands for runs, sweeps, entropy tables and timing probes,
//! and CSV/JSON report emission.

pub mod commands;
pub mod config;
pub mod report;
