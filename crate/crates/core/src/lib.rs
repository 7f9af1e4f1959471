//! Core of a coupled consumer-agent / water-distribution contamination
//! simulator.
//!
//! Consumers are simulated as agents who drink tap water, move between
//! network nodes, warn each other, and cut their water use once they are
//! exposed or warned. Their demand changes are fed back into an
//! extended-period hydraulic solve and a Lagrangian water-quality model, so
//! the contaminant plume responds to the population that is consuming it.
//!
//! The crate is `no_std` (it needs `alloc`). File formats, result writers and
//! the command-line front end live in the `hydrosoc` crate.

#![no_std]
// `!(x >= 0.0)` is how NaN inputs get rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod behavior;
pub mod engine;
pub mod hydraulics;
pub mod math;
pub mod metrics;
pub mod network;
pub mod population;
pub mod quality;
pub mod rng;
pub mod scenario;

pub use engine::{run_experiment, run_trial, ModelLevel, SimulationResults};
pub use network::{Network, NetworkBuilder};
pub use scenario::ScenarioConfig;

/// Seconds in one simulated day.
pub const SECONDS_PER_DAY: f64 = 86_400.0;
