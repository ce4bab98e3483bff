//! Batch front-end for the minimum-time solvers: scenario files in, reports,
//! trajectories and plots out.

pub mod bundled;
pub mod compare;
pub mod config;
pub mod plot;
pub mod run;

/// Process exit codes.
pub mod exit {
    pub const OK: u8 = 0;
    pub const DISAGREE: u8 = 1;
    pub const SOLVER_FAILED: u8 = 2;
    pub const CONFIG_INVALID: u8 = 3;
}
