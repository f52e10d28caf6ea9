//! Ratcheting emission schedules for a stochastic carbon budget.
//!
//! The budget follows `dX = (mu - C) dt + sigma dW` and emitting at rate `C`
//! earns `C + lambda` per unit time, discounted at `q`, until the budget is
//! exhausted. Rates may only move down. [`surface`] builds the optimal
//! threshold strategy on a rate grid, [`benchmark`] solves the
//! unconstrained barrier problem, [`mc`] simulates arbitrary strategies.

pub mod analysis;
pub mod benchmark;
pub mod error;
pub mod export;
pub mod mc;
pub mod model;
pub mod search;
pub mod surface;
pub mod verify;

#[cfg(test)]
mod properties;

pub use benchmark::{barrier_value, optimal_barrier, BarrierSolution};
pub use error::{Error, Result};
pub use model::{
    characteristic_roots, constant_rate_value, deterministic_limit_value, generator_apply,
    no_emission_value, zero_threshold_bound, ModelParams, Roots, ZeroThresholdRegion,
};
pub use surface::{solve_surface, solve_uniform, LevelSolution, RateGrid, ValueSurface};
