//! Target trajectories built from broadcast position traces.
//!
//! A [`Trajectory`] is an ordered chain of [`Segment`]s (straight lines and
//! circular arcs). Followers fit one from the lead's trace and one from the
//! preceding vehicle's trace, then measure their errors against each.

mod fit;
mod geometry;
mod trace;

pub use fit::{fit_points, fit_segments, FitParams};
pub use geometry::{ArcSegment, LineSegment, Point, Projection, Segment};
pub use trace::{
    preview_window, read_trace_csv, write_trace_csv, PreviewWindow, TracePoint, MIN_FIT_POINTS,
};

use crate::vehicle_model::GlobalPose;
use crate::{Error, Result};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    segments: Vec<Segment>,
    length: f64,
}

/// Closest point of a trajectory to a query position.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Match {
    pub point: Point,
    /// Direction of travel at the match (rad).
    pub heading: f64,
    /// Signed curvature at the match (1/m, left positive).
    pub curvature: f64,
    pub segment: usize,
    pub distance: f64,
    /// Arclength from the start of the trajectory to the match.
    pub arclength: f64,
}

/// Feedback errors against one trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ErrorSignals {
    /// Signed lateral offset, positive when left of the direction of travel.
    pub e_lat: f64,
    pub theta_err: f64,
    pub theta_err_dot: f64,
    /// 1/R of the matched segment, zero on lines.
    pub curvature: f64,
}

impl Trajectory {
    pub fn new(segments: Vec<Segment>) -> Result<Self> {
        if segments.is_empty() {
            return Err(Error::EmptyTrajectory);
        }
        let length = segments.iter().map(Segment::length).sum();
        Ok(Trajectory { segments, length })
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn start(&self) -> Point {
        self.segments[0].start()
    }

    pub fn end(&self) -> Point {
        self.segments[self.segments.len() - 1].end()
    }

    /// Largest gap between the end of one segment and the start of the next.
    pub fn max_gap(&self) -> f64 {
        self.segments
            .windows(2)
            .map(|w| w[0].end().distance(w[1].start()))
            .fold(0.0, f64::max)
    }

    /// Global closest point over all segments; ties go to the lowest segment
    /// index and, within a segment, to the earliest arclength.
    pub fn match_point(&self, p: Point) -> Match {
        let mut best: Option<(usize, Projection)> = None;
        for (i, seg) in self.segments.iter().enumerate() {
            let proj = seg.project(p);
            if best.is_none_or(|(_, b)| proj.distance < b.distance) {
                best = Some((i, proj));
            }
        }
        let (i, proj) = best.expect("trajectory is non-empty");
        let before: f64 = self.segments[..i].iter().map(Segment::length).sum();
        Match {
            point: proj.point,
            heading: proj.heading,
            curvature: self.segments[i].curvature(),
            segment: i,
            distance: proj.distance,
            arclength: before + proj.arclength,
        }
    }

    /// Samples positions every `step` metres of arclength (both ends included).
    pub fn sample(&self, step: f64) -> Vec<Point> {
        let mut out = Vec::new();
        for seg in &self.segments {
            let n = (seg.length() / step).ceil().max(1.0) as usize;
            let start = if out.is_empty() { 0 } else { 1 };
            for k in start..=n {
                out.push(seg.point_at(seg.length() * k as f64 / n as f64));
            }
        }
        out
    }
}

/// Wraps an angle into (−π, π].
pub fn wrap_angle(a: f64) -> f64 {
    let mut w = a.rem_euclid(2.0 * PI);
    if w > PI {
        w -= 2.0 * PI;
    }
    w
}

pub fn compute_errors(traj: &Trajectory, pose: &GlobalPose, v0: f64) -> ErrorSignals {
    let m = traj.match_point(Point::new(pose.x, pose.y));
    errors_from_match(&m, pose, v0)
}

pub(crate) fn errors_from_match(m: &Match, pose: &GlobalPose, v0: f64) -> ErrorSignals {
    let (sin, cos) = m.heading.sin_cos();
    let dx = pose.x - m.point.x;
    let dy = pose.y - m.point.y;
    ErrorSignals {
        e_lat: cos * dy - sin * dx,
        theta_err: wrap_angle(pose.theta - m.heading),
        theta_err_dot: pose.yaw_rate - m.curvature * v0,
        curvature: m.curvature,
    }
}
