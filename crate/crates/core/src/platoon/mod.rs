//! End-to-end platoon simulation.
//!
//! All vehicles drive at the constant speed `v0`. The lead tracks a nominal
//! path; every follower fits one trajectory to the lead's broadcast trace and
//! one to its predecessor's, measures its errors against both and applies the
//! weighted steering law. Vehicle 2 sees the lead as its predecessor, so
//! both of its error sets come from the same trajectory.
//!
//! Vehicles start on the original lane centreline, `spacing` metres apart,
//! with straight broadcast history behind them so that every follower has a
//! full preview window at `t = 0`.

mod path;
mod perturbation;

pub use path::{build_lead_path, s_curve_radius, LeadPathSpec};
pub use perturbation::{perturbation_experiment, AmplificationTable};

use crate::controller::{self, ControllerConfig, GainVector};
use crate::trajectory::{
    compute_errors, fit_segments, preview_window, ErrorSignals, FitParams, Point, TracePoint,
    Trajectory,
};
use crate::vehicle_model::{
    integrate_step, ActuationParams, StepInput, VehicleParams, VehicleState, DT_MAX,
};
use crate::{ensure_finite, Error, Result};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Mid-size sedan used wherever a configuration does not override it.
pub fn default_vehicle() -> VehicleParams {
    VehicleParams::new(1800.0, 3270.0, 140_000.0, 120_000.0, 1.2, 1.65)
        .expect("default vehicle parameters are valid")
}

pub const DEFAULT_GAINS: GainVector = GainVector::new(0.06, 0.96, 0.08);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    /// Platoon size including the lead.
    pub vehicles: usize,
    /// m/s
    pub v0: f64,
    /// Initial gap between consecutive vehicles (m).
    pub spacing: f64,
    pub lead_path: LeadPathSpec,
    pub controller: ControllerConfig,
    pub vehicle: VehicleParams,
    pub actuation: ActuationParams,
    /// Broadcast period of position samples (s).
    pub sample_interval: f64,
    /// Age a sample must reach before followers may use it (s).
    pub comm_delay: f64,
    /// Integration and control step (s).
    pub dt: f64,
    /// Defaults to the time the lead needs to traverse its path.
    pub duration: Option<f64>,
    /// Period of the recorded output series (s).
    pub record_interval: f64,
    /// Preview distance of the fitted trajectories (m).
    pub preview: f64,
    pub fit: FitParams,
    /// Apply steering commands directly, bypassing actuator dynamics.
    pub instantaneous_actuation: bool,
    /// Initial lateral offset of the lead (m).
    pub lead_initial_offset: f64,
    /// Length over which the lead's broadcast history blends into its
    /// initial offset (m).
    pub offset_ramp_length: f64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            vehicles: 4,
            v0: 10.0,
            spacing: 20.0,
            lead_path: LeadPathSpec::default(),
            controller: ControllerConfig {
                gains: DEFAULT_GAINS,
                alpha: 0.5,
                min_radius: 5.0,
            },
            vehicle: default_vehicle(),
            actuation: ActuationParams::default(),
            sample_interval: 0.1,
            comm_delay: 0.0,
            dt: 0.001,
            duration: None,
            record_interval: 0.01,
            preview: 30.0,
            fit: FitParams::default(),
            instantaneous_actuation: false,
            lead_initial_offset: 0.0,
            offset_ramp_length: 15.0,
        }
    }
}

/// Number of `dt` steps in `interval`, which must be a whole multiple.
fn steps_in(name: &str, interval: f64, dt: f64) -> Result<usize> {
    let n = (interval / dt).round();
    if (n * dt - interval).abs() > 1e-9 * interval.max(dt) {
        return Err(Error::InvalidParameter(format!(
            "{name} ({interval} s) must be a whole multiple of dt ({dt} s)"
        )));
    }
    Ok(n as usize)
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        ensure_finite(
            "scenario",
            &[
                self.v0,
                self.spacing,
                self.sample_interval,
                self.comm_delay,
                self.dt,
                self.duration.unwrap_or(1.0),
                self.record_interval,
                self.preview,
                self.lead_initial_offset,
                self.offset_ramp_length,
            ],
        )?;
        if self.vehicles < 2 {
            return Err(Error::InvalidParameter(format!(
                "platoon needs at least 2 vehicles, got {}",
                self.vehicles
            )));
        }
        let positive = [
            ("v0", self.v0),
            ("spacing", self.spacing),
            ("sample_interval", self.sample_interval),
            ("record_interval", self.record_interval),
            ("preview", self.preview),
            ("offset_ramp_length", self.offset_ramp_length),
        ];
        for (name, v) in positive {
            if v <= 0.0 {
                return Err(Error::InvalidParameter(format!("{name} must be > 0, got {v}")));
            }
        }
        if let Some(d) = self.duration {
            if d <= 0.0 {
                return Err(Error::InvalidParameter(format!("duration must be > 0, got {d}")));
            }
        }
        if !(self.dt > 0.0 && self.dt <= DT_MAX) {
            return Err(Error::InvalidParameter(format!(
                "dt must lie in (0, {DT_MAX}], got {}",
                self.dt
            )));
        }
        if self.comm_delay < 0.0 {
            return Err(Error::InvalidParameter("comm_delay must be ≥ 0".into()));
        }
        steps_in("sample_interval", self.sample_interval, self.dt)?;
        steps_in("record_interval", self.record_interval, self.dt)?;
        if self.comm_delay > 0.0 {
            steps_in("comm_delay", self.comm_delay, self.dt)?;
        }
        self.lead_path.validate()?;
        self.controller.validate()?;
        self.vehicle.validate()?;
        self.actuation.validate()?;
        Ok(())
    }

    pub fn resolved_duration(&self) -> f64 {
        self.duration.unwrap_or_else(|| self.lead_path.total_length() / self.v0)
    }

    /// Length of straight broadcast history seeded behind each vehicle (m).
    fn history_length(&self) -> f64 {
        (self.vehicles - 1) as f64 * self.spacing + 2.0 * self.preview
    }

    /// Lateral position of the lead's pre-start history at `x ≤ 0`.
    pub(crate) fn lead_history_y(&self, x: f64) -> f64 {
        let ramp = self.offset_ramp_length;
        if x <= -ramp {
            0.0
        } else {
            let u = (x + ramp) / ramp;
            self.lead_initial_offset * (1.0 - (PI * u).cos()) / 2.0
        }
    }

    /// Slope `dy/dx` of the lead's pre-start history.
    pub(crate) fn lead_history_slope(&self, x: f64) -> f64 {
        let ramp = self.offset_ramp_length;
        if x <= -ramp {
            0.0
        } else {
            let u = (x + ramp) / ramp;
            self.lead_initial_offset * PI * (PI * u).sin() / (2.0 * ramp)
        }
    }
}

/// Recorded series of one vehicle; `id` is 1-based with the lead as 1.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct VehicleSeries {
    pub id: u32,
    pub t: Vec<f64>,
    /// Lead: against its nominal path. Followers: the α-weighted blend of the
    /// errors against the lead and preceding trajectories.
    pub e_lat: Vec<f64>,
    pub delta_c: Vec<f64>,
    pub delta_f: Vec<f64>,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub theta: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VehicleSummary {
    pub id: u32,
    pub max_abs_e_lat: f64,
    pub max_abs_delta_c: f64,
}

impl VehicleSeries {
    pub fn summary(&self) -> VehicleSummary {
        let max_abs = |v: &[f64]| v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        VehicleSummary {
            id: self.id,
            max_abs_e_lat: max_abs(&self.e_lat),
            max_abs_delta_c: max_abs(&self.delta_c),
        }
    }

    fn push(&mut self, t: f64, e_lat: f64, delta_c: f64, s: &VehicleState) {
        self.t.push(t);
        self.e_lat.push(e_lat);
        self.delta_c.push(delta_c);
        self.delta_f.push(s.actuation.delta_f);
        self.x.push(s.pose.x);
        self.y.push(s.pose.y);
        self.theta.push(s.pose.theta);
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimEvent {
    pub t: f64,
    pub vehicle: u32,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimOutput {
    pub vehicles: Vec<VehicleSeries>,
    pub summaries: Vec<VehicleSummary>,
    pub events: Vec<SimEvent>,
}

/// Broadcast trace of one vehicle with the integer step of every sample.
#[derive(Debug, Default)]
struct Broadcast {
    steps: Vec<i64>,
    points: Vec<TracePoint>,
}

impl Broadcast {
    /// Samples taken no later than step `k`.
    fn visible(&self, k: i64) -> usize {
        self.steps.partition_point(|&s| s <= k)
    }
}

/// A follower's fitted view of one broadcast trace.
#[derive(Debug, Default)]
struct Tracked {
    seen: usize,
    traj: Option<Trajectory>,
}

impl Tracked {
    fn refresh(
        &mut self,
        source: &Broadcast,
        visible_step: i64,
        now: f64,
        ego: Point,
        cfg: &ScenarioConfig,
        events: &mut Vec<SimEvent>,
        vehicle: u32,
    ) {
        let n = source.visible(visible_step);
        if n == self.seen {
            return;
        }
        self.seen = n;
        let usable = &source.points[..n];
        assert!(
            usable.last().is_none_or(|p| p.t <= now + 1e-9),
            "follower {vehicle} would use a sample from its future"
        );
        let fitted = preview_window(usable, ego, cfg.preview)
            .and_then(|w| fit_segments(&w.points, &cfg.fit));
        match fitted {
            Ok(t) => self.traj = Some(t),
            Err(e) => {
                let message = format!("keeping previous trajectory: {e}");
                log::warn!("t = {now:.3} s, vehicle {vehicle}: {message}");
                events.push(SimEvent {
                    t: now,
                    vehicle,
                    message,
                });
            }
        }
    }
}

fn radius_of(e: &ErrorSignals) -> f64 {
    if e.curvature == 0.0 {
        f64::INFINITY
    } else {
        1.0 / e.curvature
    }
}

fn steer(
    lead: &ErrorSignals,
    pred: &ErrorSignals,
    cfg: &ControllerConfig,
    p: &VehicleParams,
    v0: f64,
) -> Result<f64> {
    let ff = controller::feedforward(radius_of(lead), radius_of(pred), cfg, p, v0)?;
    Ok(controller::command(ff, controller::feedback(lead, pred, cfg)))
}

fn history(cfg: &ScenarioConfig, index: usize, x0: f64, y_at: impl Fn(f64) -> f64) -> Broadcast {
    let ds = cfg.v0 * cfg.sample_interval;
    let count = (cfg.history_length() / ds).ceil() as i64;
    let sample_steps = (cfg.sample_interval / cfg.dt).round() as i64;
    let mut b = Broadcast::default();
    for j in (1..=count).rev() {
        let x = x0 - j as f64 * ds;
        b.steps.push(-j * sample_steps);
        b.points.push(TracePoint {
            vehicle_id: index as u32 + 1,
            t: -(j as f64) * cfg.sample_interval,
            x,
            y: y_at(x),
        });
    }
    b
}

/// Runs the platoon scenario with a fixed step.
pub fn run_scenario(cfg: &ScenarioConfig) -> Result<SimOutput> {
    cfg.validate()?;
    let n = cfg.vehicles;
    let nominal = build_lead_path(&cfg.lead_path, cfg.controller.min_radius)?;
    let total_steps = (cfg.resolved_duration() / cfg.dt).round() as i64;
    let sample_steps = steps_in("sample_interval", cfg.sample_interval, cfg.dt)? as i64;
    let record_steps = steps_in("record_interval", cfg.record_interval, cfg.dt)? as i64;
    let delay_steps = if cfg.comm_delay > 0.0 {
        steps_in("comm_delay", cfg.comm_delay, cfg.dt)? as i64
    } else {
        0
    };

    let mut states: Vec<VehicleState> = (0..n)
        .map(|i| {
            let mut s = VehicleState::default();
            s.pose.x = -(i as f64) * cfg.spacing;
            if i == 0 {
                s.pose.y = cfg.lead_initial_offset;
            }
            s
        })
        .collect();
    let mut traces: Vec<Broadcast> = (0..n)
        .map(|i| {
            let x0 = states[i].pose.x;
            if i == 0 {
                history(cfg, i, x0, |x| cfg.lead_history_y(x))
            } else {
                history(cfg, i, x0, |_| 0.0)
            }
        })
        .collect();
    let mut lead_view: Vec<Tracked> = (0..n).map(|_| Tracked::default()).collect();
    let mut pred_view: Vec<Tracked> = (0..n).map(|_| Tracked::default()).collect();
    let mut series: Vec<VehicleSeries> = (0..n)
        .map(|i| VehicleSeries {
            id: i as u32 + 1,
            ..Default::default()
        })
        .collect();
    let mut events = Vec::new();
    let mut commands = vec![0.0; n];
    let mut errors = vec![0.0; n];

    for k in 0..=total_steps {
        let t = k as f64 * cfg.dt;
        if k % sample_steps == 0 {
            for (i, s) in states.iter().enumerate() {
                traces[i].steps.push(k);
                traces[i].points.push(TracePoint {
                    vehicle_id: i as u32 + 1,
                    t,
                    x: s.pose.x,
                    y: s.pose.y,
                });
            }
        }
        let visible_step = k - delay_steps;

        let e0 = compute_errors(&nominal, &states[0].pose, cfg.v0);
        commands[0] = steer(&e0, &e0, &cfg.controller, &cfg.vehicle, cfg.v0)?;
        errors[0] = e0.e_lat;

        for i in 1..n {
            let ego = Point::new(states[i].pose.x, states[i].pose.y);
            let id = i as u32 + 1;
            lead_view[i].refresh(&traces[0], visible_step, t, ego, cfg, &mut events, id);
            let lead_traj = lead_view[i].traj.as_ref().ok_or(Error::InsufficientPreview {
                available: 0,
                required: crate::trajectory::MIN_FIT_POINTS,
            })?;
            let el = compute_errors(lead_traj, &states[i].pose, cfg.v0);
            let ep = if i == 1 {
                el
            } else {
                pred_view[i].refresh(&traces[i - 1], visible_step, t, ego, cfg, &mut events, id);
                let pred_traj = pred_view[i].traj.as_ref().ok_or(Error::InsufficientPreview {
                    available: 0,
                    required: crate::trajectory::MIN_FIT_POINTS,
                })?;
                compute_errors(pred_traj, &states[i].pose, cfg.v0)
            };
            commands[i] = steer(&el, &ep, &cfg.controller, &cfg.vehicle, cfg.v0)?;
            let a = cfg.controller.alpha;
            errors[i] = (1.0 - a) * el.e_lat + a * ep.e_lat;
        }

        if k % record_steps == 0 {
            for i in 0..n {
                series[i].push(t, errors[i], commands[i], &states[i]);
            }
        }
        if k == total_steps {
            break;
        }
        for i in 0..n {
            let input = StepInput {
                delta_c: commands[i],
                v_x: cfg.v0,
                instantaneous_actuation: cfg.instantaneous_actuation,
            };
            states[i] = integrate_step(&states[i], input, cfg.dt, &cfg.vehicle, &cfg.actuation)?;
        }
    }

    let summaries = series.iter().map(VehicleSeries::summary).collect();
    Ok(SimOutput {
        vehicles: series,
        summaries,
        events,
    })
}

/// Lane-relative state `(y, θ)` of a recorded pose series as a flat list.
pub(crate) fn pose_pairs(s: &VehicleSeries) -> impl Iterator<Item = (f64, f64)> + '_ {
    s.y.iter().copied().zip(s.theta.iter().copied())
}
