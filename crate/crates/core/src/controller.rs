//! Weighted feedforward/feedback steering law.
//!
//! `alpha` weights the trajectory built from the preceding vehicle's trace;
//! `1 − alpha` weights the one built from the lead's trace.

use crate::trajectory::ErrorSignals;
use crate::vehicle_model::VehicleParams;
use crate::{ensure_finite, Error, Result};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct GainVector {
    /// rad/m
    pub k_e: f64,
    /// rad/rad
    pub k_theta: f64,
    /// rad·s/rad
    pub k_omega: f64,
}

impl GainVector {
    pub const fn new(k_e: f64, k_theta: f64, k_omega: f64) -> Self {
        GainVector {
            k_e,
            k_theta,
            k_omega,
        }
    }

    fn apply(&self, e: &ErrorSignals) -> f64 {
        self.k_e * e.e_lat + self.k_theta * e.theta_err + self.k_omega * e.theta_err_dot
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ControllerConfig {
    pub gains: GainVector,
    pub alpha: f64,
    /// Arcs tighter than this are rejected by [`feedforward`] (m).
    pub min_radius: f64,
}

impl ControllerConfig {
    pub fn new(gains: GainVector, alpha: f64) -> Result<Self> {
        let cfg = ControllerConfig {
            gains,
            alpha,
            min_radius: 5.0,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        ensure_finite(
            "controller gains",
            &[self.gains.k_e, self.gains.k_theta, self.gains.k_omega, self.alpha],
        )?;
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::InvalidParameter(format!(
                "alpha must lie in [0, 1], got {}",
                self.alpha
            )));
        }
        Ok(())
    }
}

/// Steering that holds the vehicle on an arc of signed radius `radius`
/// (infinite for a straight line).
pub fn single_feedforward(radius: f64, p: &VehicleParams, v0: f64) -> f64 {
    let inv_r = if radius.is_infinite() { 0.0 } else { 1.0 / radius };
    (p.wheelbase() + p.steer_gradient * v0 * v0) * inv_r
}

/// Weighted feedforward from the lead (`r_lead`) and preceding (`r_pred`)
/// trajectories' matched radii.
pub fn feedforward(
    r_lead: f64,
    r_pred: f64,
    cfg: &ControllerConfig,
    p: &VehicleParams,
    v0: f64,
) -> Result<f64> {
    if !(v0 > 0.0) {
        return Err(Error::InvalidParameter(format!("speed must be > 0, got {v0}")));
    }
    for r in [r_lead, r_pred] {
        if r.is_nan() || r.abs() < cfg.min_radius {
            return Err(Error::InvalidParameter(format!(
                "radius {r} is below the minimum {}",
                cfg.min_radius
            )));
        }
    }
    let a = cfg.alpha;
    Ok(a * single_feedforward(r_pred, p, v0) + (1.0 - a) * single_feedforward(r_lead, p, v0))
}

pub fn feedback(err_lead: &ErrorSignals, err_pred: &ErrorSignals, cfg: &ControllerConfig) -> f64 {
    let a = cfg.alpha;
    -(1.0 - a) * cfg.gains.apply(err_lead) - a * cfg.gains.apply(err_pred)
}

pub fn command(delta_ff: f64, delta_fb: f64) -> f64 {
    delta_ff + delta_fb
}
