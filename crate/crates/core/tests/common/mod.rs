#![allow(dead_code)]

use elc_core::poly::Poly;
use elc_core::string_stability::CVector2;
use elc_core::trajectory::{ArcSegment, LineSegment, Point, Segment, Trajectory};
use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use std::f64::consts::FRAC_PI_2;

/// Real parts of the roots via the companion matrix.
pub fn root_real_parts(p: &Poly) -> Vec<f64> {
    let c = p.coeffs();
    let n = p.degree();
    let lead = c[n];
    let mut m = DMatrix::<f64>::zeros(n, n);
    for i in 1..n {
        m[(i, i - 1)] = 1.0;
    }
    for i in 0..n {
        m[(i, n - 1)] = -c[i] / lead;
    }
    m.complex_eigenvalues().iter().map(|z| z.re).collect()
}

/// Product of linear and quadratic factors with the given roots.
pub fn from_roots(real: &[f64], pairs: &[(f64, f64)]) -> Poly {
    let mut c = vec![1.0];
    let mul = |c: &[f64], f: &[f64]| {
        let mut out = vec![0.0; c.len() + f.len() - 1];
        for (i, a) in c.iter().enumerate() {
            for (j, b) in f.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        out
    };
    for r in real {
        c = mul(&c, &[-r, 1.0]);
    }
    for (re, im) in pairs {
        c = mul(&c, &[re * re + im * im, -2.0 * re, 1.0]);
    }
    Poly::new(c)
}

/// Degree 2 to 6: half built from roots near the axis, half with random
/// positive coefficients.
pub fn random_poly(rng: &mut ChaCha8Rng) -> Poly {
    let degree = rng.gen_range(2..=6);
    if rng.gen_bool(0.5) {
        let n_pairs = rng.gen_range(0..=degree / 2);
        let pairs: Vec<(f64, f64)> = (0..n_pairs)
            .map(|_| (rng.gen_range(-3.0..1.0), rng.gen_range(0.05..3.0)))
            .collect();
        let real: Vec<f64> = (0..degree - 2 * n_pairs).map(|_| rng.gen_range(-3.0..1.0)).collect();
        from_roots(&real, &pairs).scale(rng.gen_range(0.2..5.0))
    } else {
        Poly::new((0..=degree).map(|_| rng.gen_range(0.05..5.0)).collect())
    }
}

/// Points every `step` metres of arclength, starting at the path start.
pub fn sample_every(traj: &Trajectory, step: f64) -> Vec<Point> {
    let n = (traj.length() / step).floor() as usize;
    let mut out = Vec::with_capacity(n + 1);
    let mut seg_start = 0.0;
    let mut iter = traj.segments().iter().peekable();
    let mut seg = iter.next().unwrap();
    for i in 0..=n {
        let s = i as f64 * step;
        while s > seg_start + seg.length() && iter.peek().is_some() {
            seg_start += seg.length();
            seg = iter.next().unwrap();
        }
        out.push(seg.point_at((s - seg_start).min(seg.length())));
    }
    out
}

pub fn line_arc_line(straight: f64, radius: f64, sweep: f64) -> Trajectory {
    let l1 = LineSegment::new(Point::new(0.0, 0.0), Point::new(straight, 0.0));
    let turn = sweep.signum();
    let arc = ArcSegment::new(
        Point::new(straight, turn * radius),
        radius,
        -turn * FRAC_PI_2,
        sweep,
    );
    let end = Segment::Arc(arc).end();
    let l2 = LineSegment::new(
        end,
        Point::new(end.x + straight * sweep.cos(), end.y + straight * sweep.sin()),
    );
    Trajectory::new(vec![Segment::Line(l1), Segment::Arc(arc), Segment::Line(l2)]).unwrap()
}

pub fn quarter_arc(radius: f64) -> Trajectory {
    let arc = ArcSegment::new(Point::new(0.0, radius), radius, -FRAC_PI_2, FRAC_PI_2);
    Trajectory::new(vec![Segment::Arc(arc)]).unwrap()
}

/// Lead spectrum: a first-order lateral offset and a small oscillating heading.
pub fn chain_input(omegas: &[f64]) -> Vec<CVector2> {
    omegas
        .iter()
        .map(|w| {
            CVector2::new(
                Complex64::new(1.0 / (1.0 + w * w), -w / (1.0 + w * w)),
                Complex64::new(0.1, 0.02 * w.sin()),
            )
        })
        .collect()
}
