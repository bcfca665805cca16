use super::Point;
use crate::{Error, Result};
use serde::{Deserialize, Serialize};
use std::path::Path;

/// Fewest points a segment fit will accept.
pub const MIN_FIT_POINTS: usize = 3;

/// One broadcast position sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TracePoint {
    #[serde(rename = "vehicle_id")]
    pub vehicle_id: u32,
    pub t: f64,
    pub x: f64,
    pub y: f64,
}

impl TracePoint {
    pub fn point(&self) -> Point {
        Point::new(self.x, self.y)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PreviewWindow {
    pub points: Vec<TracePoint>,
    /// Index of the first returned sample in the input trace.
    pub start_index: usize,
    /// The trace ended before the preview distance was covered.
    pub truncated: bool,
}

/// Selects the samples covering `preview` metres of chord length ahead of the
/// ego vehicle.
///
/// The window starts at the sample at or immediately behind the ego's
/// projection onto the trace polyline, so the ego always lies within the
/// first fitted segment.
pub fn preview_window(trace: &[TracePoint], ego: Point, preview: f64) -> Result<PreviewWindow> {
    if trace.is_empty() {
        return Err(Error::EmptyTrace);
    }
    if !(preview > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "preview distance must be > 0, got {preview}"
        )));
    }
    let start = projection_start(trace, ego);

    let mut end = start;
    let mut travelled = 0.0;
    let tol = 1e-9 * preview.max(1.0);
    while end + 1 < trace.len() {
        let step = trace[end].point().distance(trace[end + 1].point());
        if travelled + step > preview + tol {
            break;
        }
        travelled += step;
        end += 1;
    }
    let truncated = end + 1 == trace.len() && travelled + tol < preview;
    let points = trace[start..=end].to_vec();
    if points.len() < MIN_FIT_POINTS {
        return Err(Error::InsufficientPreview {
            available: points.len(),
            required: MIN_FIT_POINTS,
        });
    }
    Ok(PreviewWindow {
        points,
        start_index: start,
        truncated,
    })
}

fn projection_start(trace: &[TracePoint], ego: Point) -> usize {
    if trace.len() == 1 {
        return 0;
    }
    let mut best = (f64::INFINITY, 0usize, 0.0f64);
    for (k, w) in trace.windows(2).enumerate() {
        let (a, b) = (w[0].point(), w[1].point());
        let (dx, dy) = (b.x - a.x, b.y - a.y);
        let len2 = dx * dx + dy * dy;
        let t = if len2 > 0.0 {
            (((ego.x - a.x) * dx + (ego.y - a.y) * dy) / len2).clamp(0.0, 1.0)
        } else {
            0.0
        };
        let d = ego.distance(Point::new(a.x + t * dx, a.y + t * dy));
        if d < best.0 {
            best = (d, k, t);
        }
    }
    let (_, k, t) = best;
    if t >= 1.0 - 1e-12 {
        k + 1
    } else {
        k
    }
}

/// Reads a `vehicle_id,t,x,y` CSV (header required, SI units).
///
/// Timestamps must increase strictly per vehicle and coordinates must be
/// finite.
pub fn read_trace_csv(path: impl AsRef<Path>) -> Result<Vec<TracePoint>> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file);
    let headers = rdr.headers()?.clone();
    let expected = ["vehicle_id", "t", "x", "y"];
    if headers.iter().collect::<Vec<_>>() != expected {
        return Err(Error::Config(format!(
            "{}: expected header {:?}, found {:?}",
            path.display(),
            expected.join(","),
            headers.iter().collect::<Vec<_>>().join(",")
        )));
    }
    let mut out: Vec<TracePoint> = Vec::new();
    for (row, rec) in rdr.deserialize().enumerate() {
        let p: TracePoint = rec?;
        if !(p.t.is_finite() && p.x.is_finite() && p.y.is_finite()) {
            return Err(Error::Config(format!(
                "{}: line {}: non-finite value",
                path.display(),
                row + 2
            )));
        }
        if let Some(prev) = out.iter().rev().find(|q| q.vehicle_id == p.vehicle_id) {
            if p.t <= prev.t {
                return Err(Error::Config(format!(
                    "{}: line {}: timestamps for vehicle {} must increase strictly",
                    path.display(),
                    row + 2,
                    p.vehicle_id
                )));
            }
        }
        out.push(p);
    }
    Ok(out)
}

pub fn write_trace_csv(path: impl AsRef<Path>, trace: &[TracePoint]) -> Result<()> {
    let path = path.as_ref();
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = csv::Writer::from_writer(file);
    for p in trace {
        w.serialize(p)?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}
