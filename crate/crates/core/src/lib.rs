//! Simulation and property lab for two-stage equity-based incentive (EBI/ESO)
//! games.
//!
//! * [`payoff`] holds the cost ledger, modifier exponents and the stage-one /
//!   stage-two game values.
//! * [`stage_one`] runs the grant negotiation between an employee and the
//!   (represented) shareholders.
//! * [`stage_two`] simulates the quarterly exercise/hedge/effort games under
//!   dilution and exports finite games and coalition values.
//! * [`coalition`] audits characteristic functions: super-additivity, core
//!   emptiness with exact certificates, Shapley values.
//! * [`equilibrium`] contains finite normal-form game solvers.
//! * [`prodfn`] audits incentive-augmented production functions against the
//!   classical production-theory assumptions.

pub mod coalition;
pub mod equilibrium;
mod error;
pub mod exact;
pub mod payoff;
pub mod prodfn;
pub mod quadrature;
pub mod stage_one;
pub mod stage_two;

pub use error::{Error, Result};
