//! Minimal hand-rolled SVG plots.

use crate::stability::{CellClass, StabilityRegion};
use crate::trajectory::{Point, Segment, Trajectory};
use std::fmt::Write;

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 440.0;
const LEFT: f64 = 80.0;
const RIGHT: f64 = 150.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 60.0;
const PALETTE: [&str; 10] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
    "#bcbd22", "#17becf",
];

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn fmt_tick(v: f64) -> String {
    if v == 0.0 {
        "0".into()
    } else if v.abs() >= 1e4 || v.abs() < 1e-3 {
        format!("{v:.1e}")
    } else {
        let s = format!("{v:.4}");
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    }
}

#[derive(Debug, Clone, Copy)]
struct Frame {
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
    log_x: bool,
}

impl Frame {
    fn fit(points: impl Iterator<Item = (f64, f64)>, log_x: bool) -> Self {
        let mut f = Frame {
            x0: f64::INFINITY,
            x1: f64::NEG_INFINITY,
            y0: f64::INFINITY,
            y1: f64::NEG_INFINITY,
            log_x,
        };
        for (x, y) in points {
            let x = if log_x { x.log10() } else { x };
            if x.is_finite() && y.is_finite() {
                f.x0 = f.x0.min(x);
                f.x1 = f.x1.max(x);
                f.y0 = f.y0.min(y);
                f.y1 = f.y1.max(y);
            }
        }
        if !f.x0.is_finite() {
            f = Frame {
                x0: 0.0,
                x1: 1.0,
                y0: 0.0,
                y1: 1.0,
                log_x,
            };
        }
        if f.x1 == f.x0 {
            f.x1 = f.x0 + 1.0;
        }
        if f.y1 == f.y0 {
            let pad = f.y0.abs().max(1.0) * 0.1;
            f.y0 -= pad;
            f.y1 += pad;
        } else {
            let pad = 0.05 * (f.y1 - f.y0);
            f.y0 -= pad;
            f.y1 += pad;
        }
        f
    }

    fn px(&self, x: f64) -> f64 {
        let x = if self.log_x { x.log10() } else { x };
        LEFT + (x - self.x0) / (self.x1 - self.x0) * (WIDTH - LEFT - RIGHT)
    }

    fn py(&self, y: f64) -> f64 {
        HEIGHT - BOTTOM - (y - self.y0) / (self.y1 - self.y0) * (HEIGHT - TOP - BOTTOM)
    }
}

fn header(out: &mut String, title: &str) {
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        out,
        r#"<text x="{}" y="24" text-anchor="middle" font-size="15">{}</text>"#,
        (LEFT + WIDTH - RIGHT) / 2.0,
        escape(title)
    );
}

fn axes(out: &mut String, f: &Frame, x_label: &str, y_label: &str) {
    let (l, r, t, b) = (LEFT, WIDTH - RIGHT, TOP, HEIGHT - BOTTOM);
    let _ = writeln!(
        out,
        r#"<rect x="{l}" y="{t}" width="{}" height="{}" fill="none" stroke="black"/>"#,
        r - l,
        b - t
    );
    for i in 0..=4 {
        let u = i as f64 / 4.0;
        let xv = f.x0 + u * (f.x1 - f.x0);
        let label = if f.log_x { fmt_tick(10f64.powf(xv)) } else { fmt_tick(xv) };
        let x = l + u * (r - l);
        let _ = writeln!(
            out,
            r#"<line x1="{x:.2}" y1="{b}" x2="{x:.2}" y2="{}" stroke="black"/><text x="{x:.2}" y="{}" text-anchor="middle">{label}</text>"#,
            b + 5.0,
            b + 18.0
        );
        let yv = f.y0 + u * (f.y1 - f.y0);
        let y = b - u * (b - t);
        let _ = writeln!(
            out,
            r#"<line x1="{}" y1="{y:.2}" x2="{l}" y2="{y:.2}" stroke="black"/><text x="{}" y="{:.2}" text-anchor="end">{}</text>"#,
            l - 5.0,
            l - 8.0,
            y + 4.0,
            fmt_tick(yv)
        );
    }
    let _ = writeln!(
        out,
        r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
        (l + r) / 2.0,
        HEIGHT - 15.0,
        escape(x_label)
    );
    let _ = writeln!(
        out,
        r#"<text x="18" y="{:.2}" text-anchor="middle" transform="rotate(-90 18 {:.2})">{}</text>"#,
        (t + b) / 2.0,
        (t + b) / 2.0,
        escape(y_label)
    );
}

fn legend(out: &mut String, entries: &[(String, &str)]) {
    for (i, (label, color)) in entries.iter().enumerate() {
        let y = TOP + 10.0 + 18.0 * i as f64;
        let x = WIDTH - RIGHT + 12.0;
        let _ = writeln!(
            out,
            r#"<line x1="{x}" y1="{y}" x2="{}" y2="{y}" stroke="{color}" stroke-width="2"/><text x="{}" y="{}">{}</text>"#,
            x + 20.0,
            x + 26.0,
            y + 4.0,
            escape(label)
        );
    }
}

fn polyline(out: &mut String, f: &Frame, pts: &[(f64, f64)], color: &str) {
    let mut d = String::new();
    for (i, (x, y)) in pts.iter().enumerate() {
        if !(x.is_finite() && y.is_finite()) || (f.log_x && *x <= 0.0) {
            continue;
        }
        let _ = write!(d, "{}{:.2},{:.2}", if i == 0 { "M" } else { " L" }, f.px(*x), f.py(*y));
    }
    let d = d.trim_start_matches(" L").replacen('L', "M", usize::from(!d.starts_with('M')));
    let _ = writeln!(out, r#"<path d="{d}" fill="none" stroke="{color}" stroke-width="1.5"/>"#);
}

/// Line chart of one or more named series.
#[derive(Debug, Clone, Default)]
pub struct LinePlot {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub log_x: bool,
    pub series: Vec<(String, Vec<(f64, f64)>)>,
}

impl LinePlot {
    pub fn new(title: &str, x_label: &str, y_label: &str) -> Self {
        LinePlot {
            title: title.into(),
            x_label: x_label.into(),
            y_label: y_label.into(),
            ..Default::default()
        }
    }

    pub fn log_x(mut self) -> Self {
        self.log_x = true;
        self
    }

    pub fn series(mut self, label: impl Into<String>, pts: Vec<(f64, f64)>) -> Self {
        self.series.push((label.into(), pts));
        self
    }

    pub fn render(&self) -> String {
        let frame = Frame::fit(self.series.iter().flat_map(|(_, p)| p.iter().copied()), self.log_x);
        let mut out = String::new();
        header(&mut out, &self.title);
        axes(&mut out, &frame, &self.x_label, &self.y_label);
        let mut entries = Vec::new();
        for (i, (label, pts)) in self.series.iter().enumerate() {
            let color = PALETTE[i % PALETTE.len()];
            polyline(&mut out, &frame, pts, color);
            entries.push((label.clone(), color));
        }
        legend(&mut out, &entries);
        out.push_str("</svg>\n");
        out
    }
}

/// One `k_ω` slice of a classified region, with an optional marked gain.
pub fn region_slice(region: &StabilityRegion, slice: usize, marker: Option<(f64, f64)>) -> String {
    let g = &region.grid;
    let frame = Frame {
        x0: g.k_e.min,
        x1: g.k_e.max,
        y0: g.k_theta.min,
        y1: g.k_theta.max,
        log_x: false,
    };
    let speed = region
        .v0
        .map_or_else(|| "all speeds".to_string(), |v| format!("V0 = {v:.3} m/s"));
    let title = format!("Stabilizing gains, k_omega = {}, {speed}", fmt_tick(g.k_omega[slice]));
    let mut out = String::new();
    header(&mut out, &title);
    let color = |c: CellClass| match c {
        CellClass::Stable => "#9fd49f",
        CellClass::Unstable => "#f2b8b8",
        CellClass::Boundary => "#555555",
    };
    let (we, wt) = (g.k_e.width(), g.k_theta.width());
    for ie in 0..g.k_e.cells {
        // Runs of equal class along k_theta become one rectangle.
        let mut it = 0;
        while it < g.k_theta.cells {
            let c = region.cell(slice, ie, it);
            let start = it;
            while it < g.k_theta.cells && region.cell(slice, ie, it) == c {
                it += 1;
            }
            let x = frame.px(g.k_e.vertex(ie));
            let y = frame.py(g.k_theta.vertex(it));
            let w = frame.px(g.k_e.vertex(ie) + we) - x;
            let h = frame.py(g.k_theta.vertex(start)) - y;
            let _ = writeln!(
                out,
                r#"<rect x="{x:.2}" y="{y:.2}" width="{:.2}" height="{:.2}" fill="{}"/>"#,
                w + 0.05,
                h + 0.05,
                color(c)
            );
            let _ = wt;
        }
    }
    axes(&mut out, &frame, "k_e (rad/m)", "k_theta (rad/rad)");
    if let Some((ke, kt)) = marker {
        let _ = writeln!(
            out,
            r#"<circle cx="{:.2}" cy="{:.2}" r="4" fill="none" stroke="black" stroke-width="2"/>"#,
            frame.px(ke),
            frame.py(kt)
        );
    }
    legend(
        &mut out,
        &[
            ("stable".into(), color(CellClass::Stable)),
            ("unstable".into(), color(CellClass::Unstable)),
            ("boundary".into(), color(CellClass::Boundary)),
        ],
    );
    out.push_str("</svg>\n");
    out
}

/// Input samples with the fitted chain drawn over them, lines and arcs in
/// different colours.
pub fn fit_overlay(points: &[Point], traj: &Trajectory) -> String {
    let sampled = traj.sample(0.25);
    let frame = Frame::fit(
        points.iter().chain(&sampled).map(|p| (p.x, p.y)),
        false,
    );
    let mut out = String::new();
    header(&mut out, &format!("Fitted trajectory ({} segments)", traj.segments().len()));
    axes(&mut out, &frame, "x (m)", "y (m)");
    for p in points {
        let _ = writeln!(
            out,
            r#"<circle cx="{:.2}" cy="{:.2}" r="1.5" fill="{}"/>"#,
            frame.px(p.x),
            frame.py(p.y),
            PALETTE[7]
        );
    }
    for seg in traj.segments() {
        let n = (seg.length() / 0.25).ceil().max(1.0) as usize;
        let pts: Vec<(f64, f64)> = (0..=n)
            .map(|k| seg.point_at(seg.length() * k as f64 / n as f64))
            .map(|p| (p.x, p.y))
            .collect();
        let color = match seg {
            Segment::Line(_) => PALETTE[0],
            Segment::Arc(_) => PALETTE[1],
        };
        polyline(&mut out, &frame, &pts, color);
    }
    legend(
        &mut out,
        &[
            ("samples".into(), PALETTE[7]),
            ("line".into(), PALETTE[0]),
            ("arc".into(), PALETTE[1]),
        ],
    );
    out.push_str("</svg>\n");
    out
}
