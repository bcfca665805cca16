use crate::trajectory::{ArcSegment, LineSegment, Point, Segment, Trajectory};
use crate::{ensure_finite, Error, Result};
use serde::{Deserialize, Serialize};
use std::f64::consts::FRAC_PI_2;

/// Double-lane-change geometry, all lengths measured along +X.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LeadPathSpec {
    pub straight_in: f64,
    pub change_length: f64,
    /// Lateral displacement of the target lane, positive to the left (m).
    pub lane_offset: f64,
    pub dwell: f64,
    pub return_length: f64,
    pub straight_out: f64,
}

impl Default for LeadPathSpec {
    fn default() -> Self {
        LeadPathSpec {
            straight_in: 300.0,
            change_length: 100.0,
            lane_offset: -3.7,
            dwell: 200.0,
            return_length: 100.0,
            straight_out: 300.0,
        }
    }
}

impl LeadPathSpec {
    /// A straight road of the given length.
    pub fn straight(length: f64) -> Self {
        LeadPathSpec {
            straight_in: length,
            change_length: 0.0,
            lane_offset: 0.0,
            dwell: 0.0,
            return_length: 0.0,
            straight_out: 0.0,
        }
    }

    pub fn total_length(&self) -> f64 {
        self.straight_in + self.change_length + self.dwell + self.return_length + self.straight_out
    }

    pub fn validate(&self) -> Result<()> {
        ensure_finite(
            "lead path",
            &[
                self.straight_in,
                self.change_length,
                self.lane_offset,
                self.dwell,
                self.return_length,
                self.straight_out,
            ],
        )?;
        let lengths = [
            self.straight_in,
            self.change_length,
            self.dwell,
            self.return_length,
            self.straight_out,
        ];
        if lengths.iter().any(|l| *l < 0.0) || self.total_length() <= 0.0 {
            return Err(Error::InvalidParameter(
                "lead path lengths must be non-negative with a positive total".into(),
            ));
        }
        if self.lane_offset != 0.0 && (self.change_length <= 0.0 || self.return_length <= 0.0) {
            return Err(Error::InvalidParameter(
                "a non-zero lane offset needs positive change and return lengths".into(),
            ));
        }
        Ok(())
    }
}

/// Radius of each arc of a symmetric S-curve covering `length` along X and
/// `offset` across.
pub fn s_curve_radius(length: f64, offset: f64) -> f64 {
    let dx = length / 2.0;
    let dy = offset.abs() / 2.0;
    (dx * dx + dy * dy) / (2.0 * dy)
}

/// Two tangent arcs from `(x0, y0)` heading +X to `(x0 + length, y0 + offset)`
/// heading +X.
fn s_curve(x0: f64, y0: f64, length: f64, offset: f64) -> [Segment; 2] {
    let r = s_curve_radius(length, offset);
    let sign = offset.signum();
    let phi = (length / 2.0 / r).asin();
    let first = ArcSegment::new(Point::new(x0, y0 + sign * r), r, -sign * FRAC_PI_2, sign * phi);
    let x1 = x0 + length;
    let y1 = y0 + offset;
    let second = ArcSegment::new(
        Point::new(x1, y1 - sign * r),
        r,
        sign * (FRAC_PI_2 + phi),
        -sign * phi,
    );
    [Segment::Arc(first), Segment::Arc(second)]
}

/// Builds the lead's nominal path starting at the origin heading +X.
///
/// Each lane change is a pair of equal-radius arcs tangent to both lanes.
pub fn build_lead_path(spec: &LeadPathSpec, min_radius: f64) -> Result<Trajectory> {
    spec.validate()?;
    if spec.lane_offset == 0.0 {
        let total = spec.total_length();
        return Trajectory::new(vec![Segment::Line(LineSegment::new(
            Point::new(0.0, 0.0),
            Point::new(total, 0.0),
        ))]);
    }
    let h = spec.lane_offset;
    for len in [spec.change_length, spec.return_length] {
        let r = s_curve_radius(len, h);
        if r < min_radius || h.abs() >= len {
            return Err(Error::InvalidParameter(format!(
                "lane change over {len} m with offset {h} m needs radius {r:.3} m (minimum {min_radius} m)"
            )));
        }
    }
    let mut segs = Vec::new();
    let mut x = 0.0;
    let push_line = |segs: &mut Vec<Segment>, x: &mut f64, y: f64, len: f64| {
        if len > 0.0 {
            segs.push(Segment::Line(LineSegment::new(Point::new(*x, y), Point::new(*x + len, y))));
            *x += len;
        }
    };
    push_line(&mut segs, &mut x, 0.0, spec.straight_in);
    segs.extend(s_curve(x, 0.0, spec.change_length, h));
    x += spec.change_length;
    push_line(&mut segs, &mut x, h, spec.dwell);
    segs.extend(s_curve(x, h, spec.return_length, -h));
    x += spec.return_length;
    push_line(&mut segs, &mut x, 0.0, spec.straight_out);
    Trajectory::new(segs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn zero_offset_is_one_line() {
        let t = build_lead_path(&LeadPathSpec::straight(1000.0), 5.0).unwrap();
        assert_eq!(t.segments().len(), 1);
        assert_relative_eq!(t.length(), 1000.0);
    }

    #[test]
    fn leftward_path_geometry() {
        let spec = LeadPathSpec {
            lane_offset: 3.7,
            ..Default::default()
        };
        assert_relative_eq!(spec.total_length(), 1000.0);
        let t = build_lead_path(&spec, 5.0).unwrap();
        assert_eq!(t.segments().len(), 7);
        assert!(t.max_gap() < 1e-9, "gap {}", t.max_gap());
        // Tangent continuity at every junction.
        for w in t.segments().windows(2) {
            let h0 = w[0].heading_at(w[0].length());
            let h1 = w[1].heading_at(0.0);
            assert!((h0 - h1).abs() < 1e-12, "{h0} vs {h1}");
        }
        // Each arc covers half the change: R sin φ = L/2, R(1 − cos φ) = h/2.
        let r = s_curve_radius(100.0, 3.7);
        let phi = (50.0f64 / r).asin();
        assert_relative_eq!(r * (1.0 - phi.cos()), 1.85, max_relative = 1e-9);
        assert_relative_eq!(t.segments()[1].radius(), r, max_relative = 1e-12);
        assert_relative_eq!(t.segments()[2].radius(), -r, max_relative = 1e-12);
        let mid = t.segments()[3].start();
        assert_relative_eq!(mid.x, 400.0, epsilon = 1e-9);
        assert_relative_eq!(mid.y, 3.7, epsilon = 1e-9);
        assert_relative_eq!(t.end().x, 1000.0, epsilon = 1e-9);
        assert_relative_eq!(t.end().y, 0.0, epsilon = 1e-9);
        assert!(t.length() > 1000.0);
    }

    #[test]
    fn default_change_is_rightward() {
        let spec = LeadPathSpec::default();
        let t = build_lead_path(&spec, 5.0).unwrap();
        assert!(t.max_gap() < 1e-9);
        assert_relative_eq!(t.segments()[3].start().y, -3.7, epsilon = 1e-9);
        assert!(t.segments()[1].curvature() < 0.0);
    }

    #[test]
    fn tight_change_rejected() {
        let spec = LeadPathSpec {
            change_length: 6.0,
            ..Default::default()
        };
        assert!(build_lead_path(&spec, 5.0).is_err());
        let bad = LeadPathSpec {
            dwell: -1.0,
            ..Default::default()
        };
        assert!(build_lead_path(&bad, 5.0).is_err());
    }
}
