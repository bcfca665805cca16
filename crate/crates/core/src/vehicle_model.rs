//! Linear bicycle model, its error-coordinate form, second-order steering
//! actuation and planar pose kinematics.
//!
//! Sign conventions: +X forward, +Y left, heading counter-clockwise from +X,
//! curvature positive for left turns.

use crate::{ensure_finite, Error, Result};
use nalgebra::{Matrix2, Vector2};
use serde::{Deserialize, Serialize};

/// Largest admissible integration step (s).
pub const DT_MAX: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VehicleParams {
    /// kg
    pub mass: f64,
    /// kg·m²
    pub yaw_inertia: f64,
    /// Front axle cornering stiffness (N/rad).
    pub cornering_front: f64,
    /// Rear axle cornering stiffness (N/rad).
    pub cornering_rear: f64,
    /// CG to front axle (m).
    pub lf: f64,
    /// CG to rear axle (m).
    pub lr: f64,
    /// rad·s²/m; zero or negative for neutral/oversteering vehicles.
    pub steer_gradient: f64,
}

impl VehicleParams {
    /// Builds a parameter set whose steer gradient is the analytic understeer
    /// gradient of the linear model.
    pub fn new(
        mass: f64,
        yaw_inertia: f64,
        cornering_front: f64,
        cornering_rear: f64,
        lf: f64,
        lr: f64,
    ) -> Result<Self> {
        let mut p = VehicleParams {
            mass,
            yaw_inertia,
            cornering_front,
            cornering_rear,
            lf,
            lr,
            steer_gradient: 0.0,
        };
        p.steer_gradient = p.understeer_gradient();
        p.validate()?;
        Ok(p)
    }

    pub fn with_steer_gradient(mut self, k: f64) -> Result<Self> {
        self.steer_gradient = k;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        ensure_finite(
            "vehicle parameters",
            &[
                self.mass,
                self.yaw_inertia,
                self.cornering_front,
                self.cornering_rear,
                self.lf,
                self.lr,
                self.steer_gradient,
            ],
        )?;
        let positive = [
            ("mass", self.mass),
            ("yaw_inertia", self.yaw_inertia),
            ("cornering_front", self.cornering_front),
            ("cornering_rear", self.cornering_rear),
            ("lf", self.lf),
            ("lr", self.lr),
        ];
        for (name, v) in positive {
            if v <= 0.0 {
                return Err(Error::InvalidParameter(format!("{name} must be > 0, got {v}")));
            }
        }
        Ok(())
    }

    pub fn wheelbase(&self) -> f64 {
        self.lf + self.lr
    }

    /// `m/(lf+lr) · (lr/Cf − lf/Cr)`.
    pub fn understeer_gradient(&self) -> f64 {
        self.mass / self.wheelbase()
            * (self.lr / self.cornering_front - self.lf / self.cornering_rear)
    }

    /// `lf·Cf − lr·Cr`
    pub(crate) fn stiffness_moment(&self) -> f64 {
        self.lf * self.cornering_front - self.lr * self.cornering_rear
    }

    /// `lf²·Cf + lr²·Cr`
    pub(crate) fn stiffness_inertia(&self) -> f64 {
        self.lf * self.lf * self.cornering_front + self.lr * self.lr * self.cornering_rear
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ActuationParams {
    pub damping_ratio: f64,
    /// rad/s
    pub natural_frequency: f64,
}

impl Default for ActuationParams {
    fn default() -> Self {
        ActuationParams {
            damping_ratio: 0.4056,
            natural_frequency: 21.4813,
        }
    }
}

impl ActuationParams {
    pub fn new(damping_ratio: f64, natural_frequency: f64) -> Result<Self> {
        let p = ActuationParams {
            damping_ratio,
            natural_frequency,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        ensure_finite("actuation parameters", &[self.damping_ratio, self.natural_frequency])?;
        if self.damping_ratio <= 0.0 || self.natural_frequency <= 0.0 {
            return Err(Error::InvalidParameter(
                "damping ratio and natural frequency must be > 0".into(),
            ));
        }
        Ok(())
    }

    /// Coefficients of `s² + 2ζω_n s + ω_n²`, ascending.
    pub fn denominator(&self) -> [f64; 3] {
        let wn = self.natural_frequency;
        [wn * wn, 2.0 * self.damping_ratio * wn, 1.0]
    }

    /// `H_a(s) = ω_n² / (s² + 2ζω_n s + ω_n²)`.
    pub fn transfer(&self, s: num_complex::Complex64) -> num_complex::Complex64 {
        let [d0, d1, d2] = self.denominator();
        d0 / (s * s * d2 + s * d1 + d0)
    }
}

/// Error-coordinate state relative to a target trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct LateralState {
    pub e_lat: f64,
    pub e_lat_dot: f64,
    pub theta_err: f64,
    pub theta_err_dot: f64,
}

impl LateralState {
    pub fn to_array(self) -> [f64; 4] {
        [self.e_lat, self.e_lat_dot, self.theta_err, self.theta_err_dot]
    }

    pub fn from_array(a: [f64; 4]) -> Self {
        LateralState {
            e_lat: a[0],
            e_lat_dot: a[1],
            theta_err: a[2],
            theta_err_dot: a[3],
        }
    }
}

/// Inertial pose plus the body-frame lateral velocity and yaw rate.
///
/// `theta` is never wrapped so that heading errors stay continuous.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct GlobalPose {
    pub x: f64,
    pub y: f64,
    pub theta: f64,
    pub yaw_rate: f64,
    pub v_y: f64,
}

impl GlobalPose {
    pub fn to_array(self) -> [f64; 5] {
        [self.x, self.y, self.theta, self.yaw_rate, self.v_y]
    }

    pub fn from_array(a: [f64; 5]) -> Self {
        GlobalPose {
            x: a[0],
            y: a[1],
            theta: a[2],
            yaw_rate: a[3],
            v_y: a[4],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ActuationState {
    /// Achieved road-wheel steering angle (rad).
    pub delta_f: f64,
    pub delta_f_dot: f64,
}

/// Matrices of `M ẍ + C ẋ + L x = B C_f δ_f − F/R` with `x = (e_lat, θ̃)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorDynamics {
    pub mass: Matrix2<f64>,
    pub damping: Matrix2<f64>,
    pub stiffness: Matrix2<f64>,
    /// Steering input direction, multiplied by `C_f`.
    pub input: Vector2<f64>,
    /// Curvature disturbance direction, multiplied by `1/R`.
    pub disturbance: Vector2<f64>,
}

impl ErrorDynamics {
    pub fn new(p: &VehicleParams, v0: f64) -> Result<Self> {
        check_speed(v0)?;
        let cf = p.cornering_front;
        let cr = p.cornering_rear;
        let moment = p.stiffness_moment();
        let inertia = p.stiffness_inertia();
        Ok(ErrorDynamics {
            mass: Matrix2::new(p.mass, 0.0, 0.0, p.yaw_inertia),
            damping: Matrix2::new((cf + cr) / v0, moment / v0, moment / v0, inertia / v0),
            stiffness: Matrix2::new(0.0, -(cf + cr), 0.0, -moment),
            input: Vector2::new(1.0, p.lf),
            disturbance: Vector2::new(p.mass * v0 * v0 + moment, inertia),
        })
    }
}

fn check_speed(v0: f64) -> Result<()> {
    if !v0.is_finite() || v0 <= 0.0 {
        return Err(Error::InvalidParameter(format!("speed must be > 0, got {v0}")));
    }
    Ok(())
}

/// Time derivative of the error-coordinate state.
///
/// `inv_r` is the signed curvature of the target (left positive).
pub fn error_dynamics_deriv(
    x: LateralState,
    delta_f: f64,
    inv_r: f64,
    p: &VehicleParams,
    v0: f64,
) -> Result<LateralState> {
    ensure_finite("lateral state", &x.to_array())?;
    ensure_finite("steering/curvature input", &[delta_f, inv_r])?;
    let dyn_ = ErrorDynamics::new(p, v0)?;
    Ok(error_deriv_unchecked(&dyn_, p.cornering_front, x, delta_f, inv_r))
}

fn error_deriv_unchecked(
    d: &ErrorDynamics,
    cf: f64,
    x: LateralState,
    delta_f: f64,
    inv_r: f64,
) -> LateralState {
    let pos = Vector2::new(x.e_lat, x.theta_err);
    let vel = Vector2::new(x.e_lat_dot, x.theta_err_dot);
    let rhs = d.input * (cf * delta_f) - d.disturbance * inv_r - d.damping * vel - d.stiffness * pos;
    // M is diagonal.
    LateralState {
        e_lat: x.e_lat_dot,
        e_lat_dot: rhs[0] / d.mass[(0, 0)],
        theta_err: x.theta_err_dot,
        theta_err_dot: rhs[1] / d.mass[(1, 1)],
    }
}

/// Canonical realisation of `H_a(s)`.
pub fn actuation_deriv(s: ActuationState, delta_c: f64, p: &ActuationParams) -> ActuationState {
    let wn = p.natural_frequency;
    ActuationState {
        delta_f: s.delta_f_dot,
        delta_f_dot: wn * wn * (delta_c - s.delta_f) - 2.0 * p.damping_ratio * wn * s.delta_f_dot,
    }
}

/// Planar kinematics with body-frame dynamics from the bicycle model.
pub fn global_kinematics_deriv(
    pose: GlobalPose,
    delta_f: f64,
    v_x: f64,
    p: &VehicleParams,
) -> Result<GlobalPose> {
    check_speed(v_x)?;
    Ok(pose_deriv_unchecked(pose, delta_f, v_x, p))
}

fn pose_deriv_unchecked(pose: GlobalPose, delta_f: f64, v_x: f64, p: &VehicleParams) -> GlobalPose {
    let cf = p.cornering_front;
    let cr = p.cornering_rear;
    let (sin, cos) = pose.theta.sin_cos();
    let v_y_dot = (cf * delta_f
        - (cf + cr) / v_x * pose.v_y
        - p.stiffness_moment() / v_x * pose.yaw_rate)
        / p.mass
        - v_x * pose.yaw_rate;
    let yaw_acc = (p.lf * cf * delta_f
        - p.stiffness_moment() / v_x * pose.v_y
        - p.stiffness_inertia() / v_x * pose.yaw_rate)
        / p.yaw_inertia;
    GlobalPose {
        x: v_x * cos - pose.v_y * sin,
        y: v_x * sin + pose.v_y * cos,
        theta: pose.yaw_rate,
        yaw_rate: yaw_acc,
        v_y: v_y_dot,
    }
}

/// Classic fixed-step fourth-order Runge–Kutta step on a fixed-size state.
pub fn rk4<const N: usize, F>(x: &[f64; N], dt: f64, f: F) -> [f64; N]
where
    F: Fn(&[f64; N]) -> [f64; N],
{
    let axpy = |base: &[f64; N], k: &[f64; N], h: f64| {
        let mut out = *base;
        for i in 0..N {
            out[i] += h * k[i];
        }
        out
    };
    let k1 = f(x);
    let k2 = f(&axpy(x, &k1, 0.5 * dt));
    let k3 = f(&axpy(x, &k2, 0.5 * dt));
    let k4 = f(&axpy(x, &k3, dt));
    let mut out = *x;
    for i in 0..N {
        out[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
    out
}

/// Pose and actuator state of one simulated vehicle.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct VehicleState {
    pub pose: GlobalPose,
    pub actuation: ActuationState,
}

/// Inputs held constant over one integration step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepInput {
    /// Commanded steering angle (rad).
    pub delta_c: f64,
    /// Longitudinal speed (m/s).
    pub v_x: f64,
    /// Apply `delta_c` directly to the wheels, skipping actuator dynamics.
    pub instantaneous_actuation: bool,
}

fn check_dt(dt: f64) -> Result<()> {
    if !(dt > 0.0 && dt <= DT_MAX) {
        return Err(Error::InvalidParameter(format!(
            "dt must lie in (0, {DT_MAX}], got {dt}"
        )));
    }
    Ok(())
}

/// Advances the coupled pose/actuation system by one RK4 step.
pub fn integrate_step(
    state: &VehicleState,
    input: StepInput,
    dt: f64,
    p: &VehicleParams,
    act: &ActuationParams,
) -> Result<VehicleState> {
    check_dt(dt)?;
    check_speed(input.v_x)?;
    ensure_finite("steering command", &[input.delta_c])?;

    if input.instantaneous_actuation {
        let pose = rk4(&state.pose.to_array(), dt, |x| {
            pose_deriv_unchecked(GlobalPose::from_array(*x), input.delta_c, input.v_x, p).to_array()
        });
        return Ok(VehicleState {
            pose: GlobalPose::from_array(pose),
            actuation: ActuationState {
                delta_f: input.delta_c,
                delta_f_dot: 0.0,
            },
        });
    }

    let packed = pack_vehicle(state);
    let next = rk4(&packed, dt, |x| {
        let s = unpack_vehicle(x);
        let dp = pose_deriv_unchecked(s.pose, s.actuation.delta_f, input.v_x, p);
        let da = actuation_deriv(s.actuation, input.delta_c, act);
        pack_vehicle(&VehicleState {
            pose: dp,
            actuation: da,
        })
    });
    Ok(unpack_vehicle(&next))
}

fn pack_vehicle(s: &VehicleState) -> [f64; 7] {
    let p = s.pose.to_array();
    [p[0], p[1], p[2], p[3], p[4], s.actuation.delta_f, s.actuation.delta_f_dot]
}

fn unpack_vehicle(x: &[f64; 7]) -> VehicleState {
    VehicleState {
        pose: GlobalPose::from_array([x[0], x[1], x[2], x[3], x[4]]),
        actuation: ActuationState {
            delta_f: x[5],
            delta_f_dot: x[6],
        },
    }
}

/// Error-coordinate state coupled with the steering actuator.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ErrorSystemState {
    pub lateral: LateralState,
    pub actuation: ActuationState,
}

/// RK4 step of the six-state linear error system driven by a held steering
/// command and target curvature.
pub fn integrate_error_step(
    state: &ErrorSystemState,
    delta_c: f64,
    inv_r: f64,
    dt: f64,
    p: &VehicleParams,
    act: &ActuationParams,
    v0: f64,
) -> Result<ErrorSystemState> {
    check_dt(dt)?;
    ensure_finite("steering/curvature input", &[delta_c, inv_r])?;
    let d = ErrorDynamics::new(p, v0)?;
    let cf = p.cornering_front;
    let pack = |s: &ErrorSystemState| {
        let l = s.lateral.to_array();
        [l[0], l[1], l[2], l[3], s.actuation.delta_f, s.actuation.delta_f_dot]
    };
    let unpack = |x: &[f64; 6]| ErrorSystemState {
        lateral: LateralState::from_array([x[0], x[1], x[2], x[3]]),
        actuation: ActuationState {
            delta_f: x[4],
            delta_f_dot: x[5],
        },
    };
    let next = rk4(&pack(state), dt, |x| {
        let s = unpack(x);
        let dl = error_deriv_unchecked(&d, cf, s.lateral, s.actuation.delta_f, inv_r);
        let da = actuation_deriv(s.actuation, delta_c, act);
        pack(&ErrorSystemState {
            lateral: dl,
            actuation: da,
        })
    });
    Ok(unpack(&next))
}
