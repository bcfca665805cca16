//! TOML scenario configuration.
//!
//! Every table rejects unknown keys. Quantities are SI; speeds may instead be
//! given in mph through the `_mph` keys, but not both forms at once.
//!
//! ```toml
//! [vehicle]
//! mass = 1800.0            # kg
//! yaw_inertia = 3270.0     # kg m^2
//! cornering_front = 140000.0
//! cornering_rear = 120000.0
//! lf = 1.2
//! lr = 1.65
//! # steer_gradient defaults to the model's understeer gradient
//!
//! [actuation]
//! damping_ratio = 0.4056
//! natural_frequency = 21.4813
//!
//! [controller]
//! k_e = 0.06
//! k_theta = 0.96
//! k_omega = 0.08
//! alpha = 0.5
//!
//! [scenario]
//! vehicles = 4
//! v0 = 10.0                # or v0_mph
//! spacing = 20.0
//!
//! [lead_path]
//! lane_offset = -3.7
//!
//! [stability]
//! speeds_mph = [10, 20, 30, 40, 50, 60, 67]
//!
//! [string_stability]
//! alphas = [0.0, 0.25, 0.5, 0.75, 1.0]
//! ```

use crate::controller::{ControllerConfig, GainVector};
use crate::platoon::{default_vehicle, LeadPathSpec, ScenarioConfig, DEFAULT_GAINS};
use crate::stability::{Axis, GridSpec, SpeedEnvelope, DEFAULT_MARGIN};
use crate::string_stability::{FrequencyGrid, NormOptions, DEFAULT_HEADING_SCALE};
use crate::trajectory::FitParams;
use crate::vehicle_model::{ActuationParams, VehicleParams};
use crate::{Error, Result, MPH_TO_MPS};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VehicleSection {
    pub mass: f64,
    pub yaw_inertia: f64,
    pub cornering_front: f64,
    pub cornering_rear: f64,
    pub lf: f64,
    pub lr: f64,
    pub steer_gradient: Option<f64>,
}

impl Default for VehicleSection {
    fn default() -> Self {
        let v = default_vehicle();
        VehicleSection {
            mass: v.mass,
            yaw_inertia: v.yaw_inertia,
            cornering_front: v.cornering_front,
            cornering_rear: v.cornering_rear,
            lf: v.lf,
            lr: v.lr,
            steer_gradient: None,
        }
    }
}

impl VehicleSection {
    fn resolve(&self) -> Result<VehicleParams> {
        let p = VehicleParams::new(
            self.mass,
            self.yaw_inertia,
            self.cornering_front,
            self.cornering_rear,
            self.lf,
            self.lr,
        )?;
        match self.steer_gradient {
            Some(k) => p.with_steer_gradient(k),
            None => Ok(p),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ControllerSection {
    pub k_e: f64,
    pub k_theta: f64,
    pub k_omega: f64,
    pub alpha: f64,
    pub min_radius: f64,
}

impl Default for ControllerSection {
    fn default() -> Self {
        ControllerSection {
            k_e: DEFAULT_GAINS.k_e,
            k_theta: DEFAULT_GAINS.k_theta,
            k_omega: DEFAULT_GAINS.k_omega,
            alpha: 0.5,
            min_radius: 5.0,
        }
    }
}

impl ControllerSection {
    pub fn gains(&self) -> GainVector {
        GainVector::new(self.k_e, self.k_theta, self.k_omega)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScenarioSection {
    pub vehicles: usize,
    pub v0: Option<f64>,
    pub v0_mph: Option<f64>,
    pub spacing: f64,
    pub sample_interval: f64,
    pub comm_delay: f64,
    pub dt: f64,
    pub duration: Option<f64>,
    pub record_interval: f64,
    pub preview: f64,
    pub instantaneous_actuation: bool,
    pub lead_initial_offset: f64,
    pub offset_ramp_length: f64,
}

impl Default for ScenarioSection {
    fn default() -> Self {
        let s = ScenarioConfig::default();
        ScenarioSection {
            vehicles: s.vehicles,
            v0: None,
            v0_mph: None,
            spacing: s.spacing,
            sample_interval: s.sample_interval,
            comm_delay: s.comm_delay,
            dt: s.dt,
            duration: s.duration,
            record_interval: s.record_interval,
            preview: s.preview,
            instantaneous_actuation: s.instantaneous_actuation,
            lead_initial_offset: s.lead_initial_offset,
            offset_ramp_length: s.offset_ramp_length,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AxisSection {
    pub min: f64,
    pub max: f64,
    pub cells: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StabilitySection {
    pub speeds: Option<Vec<f64>>,
    pub speeds_mph: Option<Vec<f64>>,
    pub margin: f64,
    pub k_e: AxisSection,
    pub k_theta: AxisSection,
    pub k_omega: Vec<f64>,
    /// Frequency grid for D-decomposition boundaries.
    pub boundary_grid: FrequencyGrid,
}

impl Default for StabilitySection {
    fn default() -> Self {
        let g = GridSpec::default();
        StabilitySection {
            speeds: None,
            speeds_mph: None,
            margin: DEFAULT_MARGIN,
            k_e: AxisSection {
                min: g.k_e.min,
                max: g.k_e.max,
                cells: g.k_e.cells,
            },
            k_theta: AxisSection {
                min: g.k_theta.min,
                max: g.k_theta.max,
                cells: g.k_theta.cells,
            },
            k_omega: g.k_omega,
            boundary_grid: FrequencyGrid {
                min: 1e-2,
                max: 1e3,
                points: 2000,
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StringStabilitySection {
    pub alphas: Vec<f64>,
    pub heading_length_scale: f64,
    pub grid: FrequencyGrid,
}

impl Default for StringStabilitySection {
    fn default() -> Self {
        StringStabilitySection {
            alphas: vec![0.0, 0.25, 0.5, 0.75, 1.0],
            heading_length_scale: DEFAULT_HEADING_SCALE,
            grid: FrequencyGrid::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PerturbationSection {
    /// Initial lateral offset of the lead (m).
    pub offset: f64,
    pub vehicles: usize,
    pub duration: f64,
    pub road_length: f64,
}

impl Default for PerturbationSection {
    fn default() -> Self {
        PerturbationSection {
            offset: 0.2,
            vehicles: 10,
            duration: 60.0,
            road_length: 1000.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    pub dir: PathBuf,
}

impl Default for OutputSection {
    fn default() -> Self {
        OutputSection {
            dir: PathBuf::from("out"),
        }
    }
}

/// The configuration file as written.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ConfigFile {
    pub vehicle: VehicleSection,
    pub actuation: ActuationParams,
    pub controller: ControllerSection,
    pub scenario: ScenarioSection,
    pub lead_path: LeadPathSpec,
    pub fit: FitParams,
    pub stability: StabilitySection,
    pub string_stability: StringStabilitySection,
    pub perturbation: PerturbationSection,
    pub output: OutputSection,
}

/// Validated settings for every command.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResolvedConfig {
    pub scenario: ScenarioConfig,
    pub speeds: SpeedEnvelope,
    pub grid: GridSpec,
    pub margin: f64,
    pub boundary_grid: FrequencyGrid,
    pub alphas: Vec<f64>,
    pub norms: NormOptions,
    pub perturbation: PerturbationSection,
    pub output_dir: PathBuf,
}

fn one_of<T: Clone>(si: &Option<T>, mph: &Option<T>, name: &str) -> Result<Option<(T, bool)>> {
    match (si, mph) {
        (Some(_), Some(_)) => Err(Error::Config(format!(
            "set either `{name}` or `{name}_mph`, not both"
        ))),
        (Some(v), None) => Ok(Some((v.clone(), false))),
        (None, Some(v)) => Ok(Some((v.clone(), true))),
        (None, None) => Ok(None),
    }
}

impl ConfigFile {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn resolve(&self) -> Result<ResolvedConfig> {
        let vehicle = self.vehicle.resolve()?;
        let actuation = self.actuation;
        actuation.validate()?;
        let c = &self.controller;
        let controller = ControllerConfig {
            gains: c.gains(),
            alpha: c.alpha,
            min_radius: c.min_radius,
        };

        let s = &self.scenario;
        let v0 = match one_of(&s.v0, &s.v0_mph, "v0")? {
            Some((v, false)) => v,
            Some((v, true)) => v * MPH_TO_MPS,
            None => ScenarioConfig::default().v0,
        };
        let fit = self.fit;
        let scenario = ScenarioConfig {
            vehicles: s.vehicles,
            v0,
            spacing: s.spacing,
            lead_path: self.lead_path,
            controller,
            vehicle,
            actuation,
            sample_interval: s.sample_interval,
            comm_delay: s.comm_delay,
            dt: s.dt,
            duration: s.duration,
            record_interval: s.record_interval,
            preview: s.preview,
            fit,
            instantaneous_actuation: s.instantaneous_actuation,
            lead_initial_offset: s.lead_initial_offset,
            offset_ramp_length: s.offset_ramp_length,
        };
        scenario.validate()?;

        let st = &self.stability;
        let speeds = match one_of(&st.speeds, &st.speeds_mph, "speeds")? {
            Some((v, false)) => SpeedEnvelope::new(v)?,
            Some((v, true)) => SpeedEnvelope::from_mph(&v)?,
            None => SpeedEnvelope::from_mph(&[10.0, 20.0, 30.0, 40.0, 50.0, 60.0, 67.0])?,
        };
        let axis = |a: &AxisSection| Axis {
            min: a.min,
            max: a.max,
            cells: a.cells,
        };
        let grid = GridSpec {
            k_e: axis(&st.k_e),
            k_theta: axis(&st.k_theta),
            k_omega: st.k_omega.clone(),
        }
        .with_slice(controller.gains.k_omega);
        grid.validate()?;
        if !(st.margin >= 0.0 && st.margin.is_finite()) {
            return Err(Error::Config(format!("stability.margin must be ≥ 0, got {}", st.margin)));
        }
        st.boundary_grid.validate()?;

        let ss = &self.string_stability;
        if ss.alphas.is_empty() || ss.alphas.iter().any(|a| !(0.0..=1.0).contains(a)) {
            return Err(Error::Config(
                "string_stability.alphas must be a non-empty list within [0, 1]".into(),
            ));
        }
        let norms = NormOptions {
            grid: ss.grid,
            heading_length_scale: ss.heading_length_scale,
        };
        norms.validate()?;

        let pt = &self.perturbation;
        if pt.vehicles < 2 || !(pt.duration > 0.0) || !(pt.road_length > 0.0) || !pt.offset.is_finite() {
            return Err(Error::Config(
                "perturbation needs vehicles ≥ 2, positive duration and road_length, finite offset".into(),
            ));
        }

        Ok(ResolvedConfig {
            scenario,
            speeds,
            grid,
            margin: st.margin,
            boundary_grid: st.boundary_grid,
            alphas: ss.alphas.clone(),
            norms,
            perturbation: pt.clone(),
            output_dir: self.output.dir.clone(),
        })
    }
}

impl ResolvedConfig {
    /// Scenario for the straight-road perturbation experiment.
    pub fn perturbation_scenario(&self) -> ScenarioConfig {
        ScenarioConfig {
            vehicles: self.perturbation.vehicles,
            lead_path: LeadPathSpec::straight(self.perturbation.road_length),
            duration: Some(self.perturbation.duration),
            ..self.scenario.clone()
        }
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::Config(e.to_string()))
    }
}

/// Parses and resolves a configuration file.
pub fn load_config(path: impl AsRef<Path>) -> Result<ResolvedConfig> {
    ConfigFile::load(path)?.resolve()
}
