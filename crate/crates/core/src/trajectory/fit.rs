//! Greedy line/arc segmentation of sampled positions.
//!
//! Points are consumed in order. The current segment grows one point at a
//! time while either a total-least-squares line or an algebraic (Kåsa)
//! circle keeps every point within the fit threshold; on violation it closes
//! at the previous point, which also starts the next segment. Adjacent
//! segments whose union still fits are then merged, and each junction is
//! moved to the split that minimises the combined squared residual. Arcs get
//! a Gauss–Newton geometric refinement when their segment is emitted.

use super::{ArcSegment, LineSegment, Point, Segment, TracePoint, Trajectory, MIN_FIT_POINTS};
use crate::{Error, Result};
use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FitParams {
    /// Largest perpendicular residual a segment may leave (m).
    pub threshold: f64,
    /// Circles larger than this are treated as lines (m).
    pub line_radius: f64,
    /// Smallest admissible arc radius (m).
    pub min_radius: f64,
}

impl Default for FitParams {
    fn default() -> Self {
        FitParams {
            threshold: 0.02,
            line_radius: 10_000.0,
            min_radius: 5.0,
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct LineFit {
    centroid: Point,
    dir: (f64, f64),
}

#[derive(Debug, Clone, Copy)]
struct CircleFit {
    center: Point,
    radius: f64,
}

#[derive(Debug, Clone, Copy)]
enum Model {
    Line(LineFit),
    Circle(CircleFit),
}

#[derive(Debug, Clone, Copy)]
struct Candidate {
    model: Model,
    max_residual: f64,
    ssr: f64,
}

fn fit_line(pts: &[Point]) -> LineFit {
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.x).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.y).sum::<f64>() / n;
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for p in pts {
        let (u, v) = (p.x - mx, p.y - my);
        sxx += u * u;
        sxy += u * v;
        syy += v * v;
    }
    let angle = 0.5 * (2.0 * sxy).atan2(sxx - syy);
    let mut dir = (angle.cos(), angle.sin());
    let first = pts[0];
    let last = pts[pts.len() - 1];
    if dir.0 * (last.x - first.x) + dir.1 * (last.y - first.y) < 0.0 {
        dir = (-dir.0, -dir.1);
    }
    LineFit {
        centroid: Point::new(mx, my),
        dir,
    }
}

fn line_residual(f: &LineFit, p: Point) -> f64 {
    (f.dir.0 * (p.y - f.centroid.y) - f.dir.1 * (p.x - f.centroid.x)).abs()
}

/// Algebraic circle fit; `None` for (near-)collinear input.
fn fit_circle_kasa(pts: &[Point]) -> Option<CircleFit> {
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.x).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.y).sum::<f64>() / n;
    let (mut suu, mut suv, mut svv) = (0.0, 0.0, 0.0);
    let (mut suz, mut svz, mut sz) = (0.0, 0.0, 0.0);
    for p in pts {
        let (u, v) = (p.x - mx, p.y - my);
        let z = u * u + v * v;
        suu += u * u;
        suv += u * v;
        svv += v * v;
        suz += u * z;
        svz += v * z;
        sz += z;
    }
    let spread = suu + svv;
    if spread <= 0.0 || (suu * svv - suv * suv) <= 1e-14 * spread * spread {
        return None;
    }
    let a = Matrix3::new(suu, suv, 0.0, suv, svv, 0.0, 0.0, 0.0, n);
    let rhs = -Vector3::new(suz, svz, sz);
    let sol = a.lu().solve(&rhs)?;
    let (d, e, f) = (sol[0], sol[1], sol[2]);
    let r2 = 0.25 * (d * d + e * e) - f;
    if !(r2 > 0.0) || !r2.is_finite() {
        return None;
    }
    Some(CircleFit {
        center: Point::new(mx - 0.5 * d, my - 0.5 * e),
        radius: r2.sqrt(),
    })
}

/// Gauss–Newton on the geometric distance `|p − c| − r`.
fn refine_circle(pts: &[Point], init: CircleFit) -> CircleFit {
    let mut c = init;
    for _ in 0..20 {
        let mut jtj = Matrix3::<f64>::zeros();
        let mut jtr = Vector3::<f64>::zeros();
        for p in pts {
            let dx = p.x - c.center.x;
            let dy = p.y - c.center.y;
            let d = dx.hypot(dy);
            if d == 0.0 {
                continue;
            }
            let row = Vector3::new(-dx / d, -dy / d, -1.0);
            let r = d - c.radius;
            jtj += row * row.transpose();
            jtr += row * r;
        }
        let Some(step) = jtj.lu().solve(&(-jtr)) else {
            break;
        };
        c = CircleFit {
            center: Point::new(c.center.x + step[0], c.center.y + step[1]),
            radius: c.radius + step[2],
        };
        if step.norm() <= 1e-13 * c.radius.max(1.0) {
            break;
        }
    }
    c
}

fn circle_residual(f: &CircleFit, p: Point) -> f64 {
    (p.distance(f.center) - f.radius).abs()
}

/// Signed angular sweep around `center` through the points, or `None` if the
/// points do not progress monotonically around it.
fn arc_sweep(pts: &[Point], center: Point) -> Option<f64> {
    let angles: Vec<f64> = pts
        .iter()
        .map(|p| (p.y - center.y).atan2(p.x - center.x))
        .collect();
    let mut total = 0.0;
    let mut sign = 0.0;
    for w in angles.windows(2) {
        let mut d = w[1] - w[0];
        if d > PI {
            d -= 2.0 * PI;
        } else if d <= -PI {
            d += 2.0 * PI;
        }
        if d != 0.0 {
            if sign == 0.0 {
                sign = d.signum();
            } else if d.signum() != sign {
                return None;
            }
        }
        total += d;
    }
    Some(total)
}

fn residual_stats(pts: &[Point], f: impl Fn(Point) -> f64) -> (f64, f64) {
    pts.iter().fold((0.0, 0.0), |(mx, ss), &p| {
        let r = f(p);
        (mx.max(r), ss + r * r)
    })
}

fn circle_admissible(pts: &[Point], c: &CircleFit, params: &FitParams) -> bool {
    c.radius >= params.min_radius
        && c.radius <= params.line_radius
        && arc_sweep(pts, c.center).is_some_and(|s| s.abs() < PI)
}

fn best_fit(pts: &[Point], params: &FitParams) -> Option<Candidate> {
    let line = fit_line(pts);
    let (lmax, lss) = residual_stats(pts, |p| line_residual(&line, p));
    let line = (lmax <= params.threshold).then_some(Candidate {
        model: Model::Line(line),
        max_residual: lmax,
        ssr: lss,
    });
    let circle = if pts.len() >= MIN_FIT_POINTS {
        fit_circle_kasa(pts).and_then(|c| {
            let (cmax, css) = residual_stats(pts, |p| circle_residual(&c, p));
            (cmax <= params.threshold && circle_admissible(pts, &c, params)).then_some(Candidate {
                model: Model::Circle(c),
                max_residual: cmax,
                ssr: css,
            })
        })
    } else {
        None
    };
    match (line, circle) {
        (Some(l), Some(c)) => Some(if c.max_residual < l.max_residual { c } else { l }),
        (l, c) => l.or(c),
    }
}

fn build_segment(pts: &[Point], cand: &Candidate, params: &FitParams) -> Segment {
    match cand.model {
        Model::Line(f) => {
            let proj = |p: Point| {
                let s = (p.x - f.centroid.x) * f.dir.0 + (p.y - f.centroid.y) * f.dir.1;
                Point::new(f.centroid.x + s * f.dir.0, f.centroid.y + s * f.dir.1)
            };
            Segment::Line(LineSegment::new(proj(pts[0]), proj(pts[pts.len() - 1])))
        }
        Model::Circle(kasa) => {
            let refined = refine_circle(pts, kasa);
            let (rmax, _) = residual_stats(pts, |p| circle_residual(&refined, p));
            let c = if refined.radius.is_finite()
                && rmax <= params.threshold
                && circle_admissible(pts, &refined, params)
            {
                refined
            } else {
                kasa
            };
            let sweep = arc_sweep(pts, c.center).unwrap_or(0.0);
            let start = (pts[0].y - c.center.y).atan2(pts[0].x - c.center.x);
            Segment::Arc(ArcSegment::new(c.center, c.radius, start, sweep))
        }
    }
}

fn dedup(points: &[Point]) -> Vec<Point> {
    let mut out: Vec<Point> = Vec::with_capacity(points.len());
    let mut dropped = 0usize;
    for &p in points {
        if out.last().is_some_and(|q| q.distance(p) <= 1e-9) {
            dropped += 1;
            continue;
        }
        out.push(p);
    }
    if dropped > 0 {
        log::warn!("dropped {dropped} duplicate trace point(s) before fitting");
    }
    out
}

fn greedy(pts: &[Point], params: &FitParams) -> Vec<(usize, usize)> {
    let mut ranges = Vec::new();
    let mut start = 0;
    while start + 1 < pts.len() {
        let mut end = start + 1;
        while end + 1 < pts.len() && best_fit(&pts[start..=end + 1], params).is_some() {
            end += 1;
        }
        ranges.push((start, end));
        start = end;
    }
    ranges
}

fn merge(pts: &[Point], ranges: &mut Vec<(usize, usize)>, params: &FitParams) {
    let mut i = 0;
    while i + 1 < ranges.len() {
        let (s, _) = ranges[i];
        let (_, e) = ranges[i + 1];
        if best_fit(&pts[s..=e], params).is_some() {
            ranges[i] = (s, e);
            ranges.remove(i + 1);
        } else {
            i += 1;
        }
    }
}

fn refine_junctions(pts: &[Point], ranges: &mut [(usize, usize)], params: &FitParams) {
    for i in 0..ranges.len().saturating_sub(1) {
        let (s, j0) = ranges[i];
        let (_, e) = ranges[i + 1];
        let cost = |j: usize| -> Option<f64> {
            let l = best_fit(&pts[s..=j], params)?;
            let r = best_fit(&pts[j..=e], params)?;
            Some(l.ssr + r.ssr)
        };
        let Some(mut best_cost) = cost(j0) else {
            continue;
        };
        let mut best = j0;
        for j in s + 1..e {
            if j == j0 {
                continue;
            }
            if let Some(c) = cost(j) {
                if c < best_cost {
                    best_cost = c;
                    best = j;
                }
            }
        }
        ranges[i].1 = best;
        ranges[i + 1].0 = best;
    }
}

/// Fits a line/arc chain through `points`.
///
/// Returns the trajectory and, per segment, the inclusive index range of the
/// (deduplicated) input points it covers.
pub fn fit_points(points: &[Point], params: &FitParams) -> Result<(Trajectory, Vec<(usize, usize)>)> {
    if !(params.threshold > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "fit threshold must be > 0, got {}",
            params.threshold
        )));
    }
    if !(params.min_radius > 0.0 && params.line_radius > params.min_radius) {
        return Err(Error::InvalidParameter(
            "radius limits must satisfy 0 < min_radius < line_radius".into(),
        ));
    }
    crate::ensure_finite(
        "trace coordinates",
        &points.iter().flat_map(|p| [p.x, p.y]).collect::<Vec<_>>(),
    )?;
    let pts = dedup(points);
    if pts.len() < MIN_FIT_POINTS {
        return Err(Error::InsufficientPreview {
            available: pts.len(),
            required: MIN_FIT_POINTS,
        });
    }

    let mut ranges = greedy(&pts, params);
    for _ in 0..2 {
        merge(&pts, &mut ranges, params);
        refine_junctions(&pts, &mut ranges, params);
    }

    let segments = ranges
        .iter()
        .map(|&(s, e)| {
            let slice = &pts[s..=e];
            let cand = best_fit(slice, params).expect("ranges only hold admissible fits");
            build_segment(slice, &cand, params)
        })
        .collect();
    Ok((Trajectory::new(segments)?, ranges))
}

pub fn fit_segments(points: &[TracePoint], params: &FitParams) -> Result<Trajectory> {
    let pts: Vec<Point> = points.iter().map(TracePoint::point).collect();
    fit_points(&pts, params).map(|(t, _)| t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn collinear_points_give_one_line() {
        let pts: Vec<Point> = (0..20).map(|i| Point::new(i as f64 * 0.7, 2.0 + i as f64 * 0.3)).collect();
        let (traj, ranges) = fit_points(&pts, &FitParams::default()).unwrap();
        assert_eq!(traj.segments().len(), 1);
        assert!(matches!(traj.segments()[0], Segment::Line(_)));
        assert_eq!(ranges, vec![(0, 19)]);
        for p in &pts {
            assert!(traj.match_point(*p).distance < 1e-12);
        }
    }

    #[test]
    fn quarter_circle_recovered() {
        let r = 50.0;
        let pts: Vec<Point> = (0..50)
            .map(|i| {
                let phi = -PI / 2.0 + (PI / 2.0) * i as f64 / 49.0;
                Point::new(r * phi.cos(), r + r * phi.sin())
            })
            .collect();
        let (traj, _) = fit_points(&pts, &FitParams::default()).unwrap();
        assert_eq!(traj.segments().len(), 1);
        let Segment::Arc(a) = traj.segments()[0] else {
            panic!("expected arc");
        };
        assert!((a.radius - r).abs() / r < 1e-3);
        assert!(a.is_left());
        assert_relative_eq!(a.sweep, PI / 2.0, epsilon = 1e-9);
    }

    #[test]
    fn duplicates_are_dropped() {
        let mut pts: Vec<Point> = (0..10).map(|i| Point::new(i as f64, 0.0)).collect();
        pts.insert(4, pts[4]);
        let (traj, ranges) = fit_points(&pts, &FitParams::default()).unwrap();
        assert_eq!(traj.segments().len(), 1);
        assert_eq!(ranges, vec![(0, 9)]);
    }

    #[test]
    fn rejects_bad_arguments() {
        let pts: Vec<Point> = (0..10).map(|i| Point::new(i as f64, 0.0)).collect();
        let bad = FitParams {
            threshold: 0.0,
            ..Default::default()
        };
        assert!(fit_points(&pts, &bad).is_err());
        assert!(matches!(
            fit_points(&pts[..2], &FitParams::default()),
            Err(Error::InsufficientPreview { .. })
        ));
        let same = vec![Point::new(1.0, 1.0); 5];
        assert!(fit_points(&same, &FitParams::default()).is_err());
    }

    #[test]
    fn kasa_is_none_for_collinear() {
        let pts: Vec<Point> = (0..5).map(|i| Point::new(i as f64, 2.0 * i as f64)).collect();
        assert!(fit_circle_kasa(&pts).is_none());
    }

    #[test]
    fn refinement_removes_kasa_bias_on_noisy_short_arc() {
        let r = 80.0;
        let pts: Vec<Point> = (0..30)
            .map(|i| {
                let phi = 0.3 * i as f64 / 29.0;
                let rr = r + if i % 2 == 0 { 0.01 } else { -0.01 };
                Point::new(rr * phi.cos(), rr * phi.sin())
            })
            .collect();
        let kasa = fit_circle_kasa(&pts).unwrap();
        let refined = refine_circle(&pts, kasa);
        let geo = |c: &CircleFit| residual_stats(&pts, |p| circle_residual(c, p)).1;
        assert!(geo(&refined) <= geo(&kasa) + 1e-15);
        assert!((refined.radius - r).abs() < 0.5);
    }
}
