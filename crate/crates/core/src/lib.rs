//! Simulation and analysis of a five-variable ODE model of immune
//! checkpoint blockade, built around the delayed-response phenomenon.
//!
//! * [`model`]: parameters, state, right-hand side.
//! * [`integrator`]: adaptive Dormand-Prince 5(4) with dense output and
//!   crossing detection.
//! * [`metrics`]: delay / dormancy / post-treatment size and response class.
//! * [`experiments`]: one-at-a-time sensitivities, thresholds, region maps.
//! * [`calibration`]: simplex fit of parameters to a target delay.
//! * [`dosing`]: discrete blockade doses as parameter steps.
//! * [`io`]: config files, CSV / JSON / SVG output, command drivers.

pub mod calibration;
pub mod dosing;
pub mod error;
pub mod experiments;
pub mod integrator;
pub mod io;
pub mod metrics;
pub mod model;
mod nelder_mead;

pub use error::{Error, Result};
pub use integrator::{find_crossing, integrate, Direction, IntegratorConfig, Termination, Trajectory};
pub use metrics::{classify, MetricsConfig, ResponseClass, ResponseReport};
pub use model::{baseline_params, growth_rate, initial_state, rhs, Component, ModelParams, ParamId, StateVector};
