//! Benchmark runners, scenario worlds and output plumbing behind the
//! `tether` command-line tool.

pub mod config;
pub mod dpbench;
pub mod e2e;
pub mod fitbench;
pub mod output;
pub mod scenarios;
pub mod stats;
