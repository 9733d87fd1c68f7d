//! Configuration ingestion, run orchestration and report emission for the
//! `fbspec` command-line tool.

pub mod config;
pub mod emit;
pub mod runner;

/// Process exit codes of the binary.
pub mod exit_code {
    pub const OK: i32 = 0;
    pub const CONFIG: i32 = 1;
    pub const SOLVER_TERMINAL: i32 = 2;
    pub const IO: i32 = 3;
}
