use serde::{Deserialize, Serialize};
use std::f64::consts::{FRAC_PI_2, PI};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }

    pub fn distance(self, other: Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Projection {
    pub point: Point,
    /// Arclength from the segment start.
    pub arclength: f64,
    pub distance: f64,
    pub heading: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LineSegment {
    pub start: Point,
    pub end: Point,
}

impl LineSegment {
    pub fn new(start: Point, end: Point) -> Self {
        LineSegment { start, end }
    }

    pub fn length(&self) -> f64 {
        self.start.distance(self.end)
    }

    pub fn heading(&self) -> f64 {
        (self.end.y - self.start.y).atan2(self.end.x - self.start.x)
    }

    /// Unit vector along the direction of travel.
    pub fn direction(&self) -> (f64, f64) {
        let l = self.length();
        ((self.end.x - self.start.x) / l, (self.end.y - self.start.y) / l)
    }

    pub fn point_at(&self, s: f64) -> Point {
        let (dx, dy) = self.direction();
        Point::new(self.start.x + s * dx, self.start.y + s * dy)
    }

    pub fn project(&self, p: Point) -> Projection {
        let len = self.length();
        let (dx, dy) = self.direction();
        let s = ((p.x - self.start.x) * dx + (p.y - self.start.y) * dy).clamp(0.0, len);
        let point = self.point_at(s);
        Projection {
            point,
            arclength: s,
            distance: p.distance(point),
            heading: self.heading(),
        }
    }
}

/// Circular arc. `sweep` is signed: positive turns left (counter-clockwise).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArcSegment {
    pub center: Point,
    pub radius: f64,
    /// Polar angle of the start point around the center.
    pub start_angle: f64,
    pub sweep: f64,
}

impl ArcSegment {
    pub fn new(center: Point, radius: f64, start_angle: f64, sweep: f64) -> Self {
        ArcSegment {
            center,
            radius,
            start_angle,
            sweep,
        }
    }

    fn turn(&self) -> f64 {
        if self.sweep >= 0.0 {
            1.0
        } else {
            -1.0
        }
    }

    pub fn is_left(&self) -> bool {
        self.sweep >= 0.0
    }

    pub fn length(&self) -> f64 {
        self.radius * self.sweep.abs()
    }

    fn angle_at(&self, s: f64) -> f64 {
        self.start_angle + self.turn() * s / self.radius
    }

    pub fn point_at(&self, s: f64) -> Point {
        let phi = self.angle_at(s);
        Point::new(
            self.center.x + self.radius * phi.cos(),
            self.center.y + self.radius * phi.sin(),
        )
    }

    pub fn heading_at(&self, s: f64) -> f64 {
        self.angle_at(s) + self.turn() * FRAC_PI_2
    }

    pub fn project(&self, p: Point) -> Projection {
        let vx = p.x - self.center.x;
        let vy = p.y - self.center.y;
        let r = vx.hypot(vy);
        let at = |s: f64| {
            let point = self.point_at(s);
            Projection {
                point,
                arclength: s,
                distance: p.distance(point),
                heading: self.heading_at(s),
            }
        };
        if r <= 1e-12 * self.radius {
            return at(0.0);
        }
        let offset = (self.turn() * (vy.atan2(vx) - self.start_angle)).rem_euclid(2.0 * PI);
        if offset <= self.sweep.abs() {
            return at(self.radius * offset);
        }
        let first = at(0.0);
        let last = at(self.length());
        if last.distance < first.distance {
            last
        } else {
            first
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Segment {
    Line(LineSegment),
    Arc(ArcSegment),
}

impl Segment {
    pub fn length(&self) -> f64 {
        match self {
            Segment::Line(l) => l.length(),
            Segment::Arc(a) => a.length(),
        }
    }

    pub fn start(&self) -> Point {
        self.point_at(0.0)
    }

    pub fn end(&self) -> Point {
        match self {
            Segment::Line(l) => l.end,
            Segment::Arc(a) => a.point_at(a.length()),
        }
    }

    pub fn point_at(&self, s: f64) -> Point {
        match self {
            Segment::Line(l) => l.point_at(s),
            Segment::Arc(a) => a.point_at(s),
        }
    }

    pub fn heading_at(&self, s: f64) -> f64 {
        match self {
            Segment::Line(l) => l.heading(),
            Segment::Arc(a) => a.heading_at(s),
        }
    }

    /// Signed curvature (1/m), zero for lines.
    pub fn curvature(&self) -> f64 {
        match self {
            Segment::Line(_) => 0.0,
            Segment::Arc(a) => {
                if a.is_left() {
                    1.0 / a.radius
                } else {
                    -1.0 / a.radius
                }
            }
        }
    }

    /// Signed radius; infinite for lines.
    pub fn radius(&self) -> f64 {
        match self {
            Segment::Line(_) => f64::INFINITY,
            Segment::Arc(a) if a.is_left() => a.radius,
            Segment::Arc(a) => -a.radius,
        }
    }

    pub fn project(&self, p: Point) -> Projection {
        match self {
            Segment::Line(l) => l.project(p),
            Segment::Arc(a) => a.project(p),
        }
    }

    pub fn is_arc(&self) -> bool {
        matches!(self, Segment::Arc(_))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn arc_geometry() {
        // Quarter circle, left turn, from (10, 0) to (0, 10).
        let a = ArcSegment::new(Point::new(0.0, 0.0), 10.0, 0.0, FRAC_PI_2);
        assert_relative_eq!(a.length(), 5.0 * PI);
        let end = a.point_at(a.length());
        assert_relative_eq!(end.x, 0.0, epsilon = 1e-12);
        assert_relative_eq!(end.y, 10.0);
        assert_relative_eq!(a.heading_at(0.0), FRAC_PI_2);
        let s = Segment::Arc(a);
        assert_relative_eq!(s.curvature(), 0.1);
        assert_relative_eq!(s.radius(), 10.0);

        let right = Segment::Arc(ArcSegment::new(Point::new(0.0, 0.0), 10.0, FRAC_PI_2, -FRAC_PI_2));
        assert_relative_eq!(right.curvature(), -0.1);
        assert_relative_eq!(right.heading_at(0.0), 0.0);
    }

    #[test]
    fn arc_projection_clamps_to_nearer_end() {
        let a = ArcSegment::new(Point::new(0.0, 0.0), 10.0, 0.0, FRAC_PI_2);
        let p = a.project(Point::new(20.0, -1.0));
        assert_eq!(p.arclength, 0.0);
        let p = a.project(Point::new(-1.0, 20.0));
        assert_relative_eq!(p.arclength, a.length());
        let p = a.project(Point::new(7.0, 7.0));
        assert_relative_eq!(p.distance, 10.0 - 98f64.sqrt(), epsilon = 1e-12);
    }

    #[test]
    fn line_projection() {
        let l = LineSegment::new(Point::new(1.0, 1.0), Point::new(4.0, 5.0));
        let p = l.project(Point::new(1.0 + 4.0, 1.0 - 3.0));
        assert_eq!(p.arclength, 0.0);
        assert_relative_eq!(p.distance, 5.0);
        assert_relative_eq!(Segment::Line(l).radius(), f64::INFINITY);
    }
}
