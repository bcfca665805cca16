//! Lateral control of a connected-vehicle platoon during an emergency lane
//! change.
//!
//! Each follower builds two target trajectories from position traces
//! broadcast by the lead and the immediately preceding vehicle, computes
//! cross-track, heading and yaw-rate errors against both, and blends the
//! resulting feedforward/feedback steering with a weight `alpha`.
//!
//! The crate is organised by concern:
//!
//! * [`vehicle_model`]: linear bicycle model, error dynamics, steering
//!   actuation, RK4 integration.
//! * [`trajectory`]: preview windows over broadcast traces, line/arc spline
//!   fitting and error signals.
//! * [`controller`]: the weighted feedforward/feedback steering law.
//! * [`stability`]: closed-loop characteristic polynomial, Routh test,
//!   D-decomposition and stabilizing gain sets over a speed envelope.
//! * [`string_stability`]: frequency-domain certification of lateral string
//!   stability.
//! * [`platoon`]: end-to-end platoon simulation.
//! * [`io`]: configuration schema, CSV/JSON/SVG artifacts.
//!
//! Everything is deterministic. Grid sweeps run on rayon when the `parallel`
//! feature is enabled (the default) and fall back to plain iterators
//! otherwise; both paths produce identical results.

pub mod controller;
mod error;
pub mod exec;
pub mod io;
pub mod platoon;
pub mod poly;
pub mod stability;
pub mod string_stability;
pub mod trajectory;
pub mod vehicle_model;

pub use error::{Error, Result};

/// Exact conversion factor from miles per hour to metres per second.
pub const MPH_TO_MPS: f64 = 0.44704;

pub(crate) fn ensure_finite(name: &str, values: &[f64]) -> Result<()> {
    if values.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(name.to_string()))
    }
}
