//! Numerical laboratory for planar slow-fast systems: delayed loss of
//! stability at transcritical points, hysteresis-driven growth of the delay,
//! strip asymptotics, and the canard transition window of a Liénard
//! oscillator.
//!
//! The crate is organized around four layers:
//!
//! - [`ode`] — embedded Dormand–Prince 5(4) integration with event
//!   localization and auxiliary quadratures;
//! - [`models`] — the model catalogue (vector fields, charts, invariant
//!   manifolds, standard events);
//! - [`analysis`] — closed-form references, Lyapunov monitors, crossing
//!   sequences, residence-time reports, diagonal asymptotics;
//! - [`canard`] — attractor classification and bisection of the canard
//!   transition window.
//!
//! Everything is deterministic: no randomness, no thread-order dependence in
//! results.

pub mod analysis;
pub mod canard;
pub mod models;
pub mod ode;
pub mod quad;

#[cfg(test)]
pub(crate) mod testutil;

pub use models::SystemModel;
pub use ode::{Chart, State, ToleranceConfig, Trajectory};
