use super::{pose_pairs, run_scenario, ScenarioConfig, SimOutput};
use crate::{Error, Result};
use serde::{Deserialize, Serialize};

/// Empirical L₂ amplification of a lateral perturbation of the lead.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AmplificationTable {
    pub offset: f64,
    pub heading_length_scale: f64,
    /// `‖x_i‖₂` of the scaled lane-relative state `(y, ℓ·θ)`, lead first.
    pub norms: Vec<f64>,
    /// `‖x_i‖₂ / ‖x_1‖₂` (zero when the lead's norm is zero).
    pub ratios: Vec<f64>,
    pub max_ratio: f64,
}

/// Offsets the lead laterally by `offset` on a straight road and measures
/// how the resulting transient propagates down the platoon.
///
/// The lead's norm also covers the broadcast history that ramps it onto the
/// offset, since followers react to that part of its path as well.
pub fn perturbation_experiment(
    cfg: &ScenarioConfig,
    offset: f64,
    heading_length_scale: f64,
) -> Result<(AmplificationTable, SimOutput)> {
    if cfg.lead_path.lane_offset != 0.0 {
        return Err(Error::InvalidParameter(
            "perturbation experiment needs a straight lead path".into(),
        ));
    }
    if !(heading_length_scale > 0.0 && heading_length_scale.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "heading_length_scale must be > 0, got {heading_length_scale}"
        )));
    }
    let mut run = cfg.clone();
    run.lead_initial_offset = offset;
    let out = run_scenario(&run)?;

    let ell = heading_length_scale;
    let h = run.record_interval;
    let energy = |pairs: &mut dyn Iterator<Item = (f64, f64)>| -> f64 {
        pairs.map(|(y, th)| h * (y * y + ell * ell * th * th)).sum()
    };

    let ramp = run.offset_ramp_length;
    let dx = run.v0 * h;
    let steps = (ramp / dx).ceil() as usize;
    let mut lead_history = (1..=steps).map(|j| {
        let x = -(j as f64) * dx;
        (run.lead_history_y(x), run.lead_history_slope(x).atan())
    });
    let history = energy(&mut lead_history);

    let norms: Vec<f64> = out
        .vehicles
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let own = energy(&mut pose_pairs(s));
            if i == 0 {
                (own + history).sqrt()
            } else {
                own.sqrt()
            }
        })
        .collect();
    let ratios: Vec<f64> = norms
        .iter()
        .map(|n| if norms[0] > 0.0 { n / norms[0] } else { 0.0 })
        .collect();
    let max_ratio = ratios.iter().copied().fold(0.0, f64::max);
    Ok((
        AmplificationTable {
            offset,
            heading_length_scale,
            norms,
            ratios,
            max_ratio,
        },
        out,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::platoon::LeadPathSpec;

    fn cfg() -> ScenarioConfig {
        ScenarioConfig {
            vehicles: 3,
            lead_path: LeadPathSpec::straight(500.0),
            duration: Some(8.0),
            ..Default::default()
        }
    }

    #[test]
    fn zero_perturbation_gives_zero_norms() {
        let (t, _) = perturbation_experiment(&cfg(), 0.0, 12.0).unwrap();
        assert!(t.norms.iter().all(|n| *n < 1e-12), "{:?}", t.norms);
        assert_eq!(t.max_ratio, 0.0);
    }

    #[test]
    fn needs_straight_path() {
        let bad = ScenarioConfig {
            lead_path: LeadPathSpec::default(),
            ..cfg()
        };
        assert!(perturbation_experiment(&bad, 0.2, 12.0).is_err());
        assert!(perturbation_experiment(&cfg(), 0.2, 0.0).is_err());
    }

    #[test]
    fn lead_ratio_is_one() {
        let (t, _) = perturbation_experiment(&cfg(), 0.2, 12.0).unwrap();
        assert_eq!(t.ratios[0], 1.0);
        assert!(t.norms[0] > 0.0);
    }
}
