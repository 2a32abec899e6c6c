//! Scenario-driven batch runs of the `ebigame-core` modules.
//!
//! A scenario is a TOML file with a mandatory `name` and `seed` and one
//! optional table per module (`stage1`, `stage2`, `coalition`, `equilibrium`,
//! `prodfn`). [`scenario::parse_scenario`] validates it, [`run::run`] executes
//! the present blocks and [`emit::emit`] writes the report files.

pub mod emit;
pub mod run;
pub mod scenario;

/// The shipped demo scenario.
pub const DEMO_SCENARIO: &str = include_str!("../scenarios/demo.toml");

/// Process exit codes.
pub mod exit {
    pub const OK: i32 = 0;
    pub const INVALID: i32 = 1;
    pub const NUMERICAL: i32 = 2;
}
