//! Closed-loop characteristic polynomial, Routh–Hurwitz test,
//! D-decomposition boundaries and stabilizing gain sets over a speed
//! envelope.

use crate::controller::GainVector;
use crate::exec::Exec;
use crate::poly::Poly;
use crate::vehicle_model::{ActuationParams, VehicleParams};
use crate::{Error, Result, MPH_TO_MPS};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::io::Write;
use std::path::Path;

/// Default strict-Hurwitz margin (rad/s).
pub const DEFAULT_MARGIN: f64 = 1e-9;

/// Closed-loop polynomial split by gain:
/// `Δ(s; K) = base(s) + k_e·ke(s) + k_θ·kθ(s) + k_ω·kω(s)`.
#[derive(Debug, Clone, PartialEq)]
pub struct CharPolyParts {
    /// Actuator denominator times the open-loop quartic `Δ₀(s)`.
    pub base: Poly,
    pub k_e: Poly,
    pub k_theta: Poly,
    pub k_omega: Poly,
}

impl CharPolyParts {
    pub fn new(p: &VehicleParams, act: &ActuationParams, v0: f64) -> Result<Self> {
        if !(v0 > 0.0 && v0.is_finite()) {
            return Err(Error::InvalidParameter(format!("speed must be > 0, got {v0}")));
        }
        let (m, iz, cf, cr, a, b) = (
            p.mass,
            p.yaw_inertia,
            p.cornering_front,
            p.cornering_rear,
            p.lf,
            p.lr,
        );
        let l = a + b;
        let wn2 = act.natural_frequency * act.natural_frequency;
        let actuator = Poly::new(act.denominator().to_vec());
        let base = &actuator * &open_loop_quartic(p, v0);
        let gain = cf * wn2;
        let k_e = Poly::new(vec![l * cr, b * l * cr / v0, iz]).scale(gain);
        let heading = Poly::new(vec![0.0, l * cr / v0, m * a]).scale(gain);
        let k_omega = &heading * &Poly::monomial(1);
        Ok(CharPolyParts {
            base,
            k_e,
            k_theta: heading,
            k_omega,
        })
    }

    pub fn assemble(&self, k: &GainVector) -> Poly {
        let mut p = &self.base + &self.k_e.scale(k.k_e);
        p = &p + &self.k_theta.scale(k.k_theta);
        &p + &self.k_omega.scale(k.k_omega)
    }

    /// Dense ascending coefficients of `Δ(s; K)`, padded to degree 6.
    fn coeffs7(&self, k: &GainVector) -> [f64; 7] {
        let mut out = [0.0; 7];
        for (poly, w) in [
            (&self.base, 1.0),
            (&self.k_e, k.k_e),
            (&self.k_theta, k.k_theta),
            (&self.k_omega, k.k_omega),
        ] {
            for (i, c) in poly.coeffs().iter().enumerate() {
                out[i] += w * c;
            }
        }
        out
    }
}

/// `Δ₀(s)`: determinant of the open-loop error dynamics, `s²` times a
/// quadratic.
pub fn open_loop_quartic(p: &VehicleParams, v0: f64) -> Poly {
    let (m, iz, cf, cr, a, b) = (
        p.mass,
        p.yaw_inertia,
        p.cornering_front,
        p.cornering_rear,
        p.lf,
        p.lr,
    );
    let l = a + b;
    Poly::new(vec![
        0.0,
        0.0,
        l * l * cf * cr / (v0 * v0) - m * (a * cf - b * cr),
        ((iz + m * a * a) * cf + (iz + m * b * b) * cr) / v0,
        m * iz,
    ])
}

/// Closed-loop characteristic polynomial at one gain vector and speed.
#[derive(Debug, Clone, PartialEq)]
pub struct CharPoly {
    pub poly: Poly,
    pub gains: GainVector,
    pub v0: f64,
}

impl CharPoly {
    /// Coefficients divided by the leading one (`m_v·I_z`).
    pub fn monic(&self) -> Poly {
        self.poly.scale(1.0 / self.poly.leading())
    }
}

pub fn char_poly(k: &GainVector, p: &VehicleParams, act: &ActuationParams, v0: f64) -> Result<CharPoly> {
    let parts = CharPolyParts::new(p, act, v0)?;
    Ok(CharPoly {
        poly: parts.assemble(k),
        gains: *k,
        v0,
    })
}

/// First column of the Routh array of `coeffs` (ascending), or `None` when
/// a zero pivot stops the construction.
fn routh_first_column(coeffs: &[f64]) -> Option<Vec<f64>> {
    let n = coeffs.len() - 1;
    let desc: Vec<f64> = coeffs.iter().rev().copied().collect();
    let mut prev: Vec<f64> = desc.iter().step_by(2).copied().collect();
    let mut cur: Vec<f64> = desc.iter().skip(1).step_by(2).copied().collect();
    let mut first = vec![prev[0]];
    for _ in 0..n {
        if cur.is_empty() {
            cur.push(0.0);
        }
        let pivot = cur[0];
        first.push(pivot);
        if pivot == 0.0 {
            return None;
        }
        let next: Vec<f64> = (0..prev.len().saturating_sub(1))
            .map(|j| {
                let p1 = prev.get(j + 1).copied().unwrap_or(0.0);
                let c1 = cur.get(j + 1).copied().unwrap_or(0.0);
                (pivot * p1 - prev[0] * c1) / pivot
            })
            .collect();
        prev = cur;
        cur = next;
    }
    Some(first)
}

/// Number of right-half-plane roots from Routh sign changes; `None` when a
/// zero pivot or zero row makes the count undefined without perturbation.
pub fn routh_unstable_count(poly: &Poly) -> Option<usize> {
    if poly.degree() == 0 {
        return Some(0);
    }
    let col = routh_first_column(poly.coeffs())?;
    Some(col.windows(2).filter(|w| w[0].signum() != w[1].signum()).count())
}

/// True iff every root has real part below `−margin`.
///
/// Routh test on `p(s − margin)`. A zero pivot or a vanished row means a root
/// on or beyond the shifted axis, so it is reported as not Hurwitz.
pub fn is_hurwitz(poly: &Poly, margin: f64) -> Result<bool> {
    if poly.is_zero() {
        return Err(Error::InvalidParameter("zero polynomial".into()));
    }
    if poly.degree() == 0 {
        return Err(Error::InvalidParameter("polynomial must have degree ≥ 1".into()));
    }
    let shifted = if margin != 0.0 { poly.shift(-margin) } else { poly.clone() };
    Ok(hurwitz_coeffs(shifted.coeffs()))
}

fn hurwitz_coeffs(coeffs: &[f64]) -> bool {
    let lead = coeffs[coeffs.len() - 1];
    let sign = lead.signum();
    if coeffs.iter().any(|c| !(c * sign > 0.0)) {
        return false;
    }
    match routh_first_column(coeffs) {
        Some(col) => col.iter().all(|c| c * sign > 0.0),
        None => false,
    }
}

/// Operating speeds over which a gain vector must stabilise (m/s).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpeedEnvelope {
    speeds: Vec<f64>,
}

impl SpeedEnvelope {
    pub fn new(speeds: Vec<f64>) -> Result<Self> {
        if speeds.is_empty() {
            return Err(Error::InvalidParameter("speed envelope is empty".into()));
        }
        if speeds.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(Error::InvalidParameter("speeds must be finite and > 0".into()));
        }
        Ok(SpeedEnvelope { speeds })
    }

    pub fn from_mph(mph: &[f64]) -> Result<Self> {
        SpeedEnvelope::new(mph.iter().map(|v| v * MPH_TO_MPS).collect())
    }

    pub fn speeds(&self) -> &[f64] {
        &self.speeds
    }

    /// `γ = 1/V₀` per speed.
    pub fn gammas(&self) -> Vec<f64> {
        self.speeds.iter().map(|v| 1.0 / v).collect()
    }

    pub fn v_min(&self) -> f64 {
        self.speeds.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn v_max(&self) -> f64 {
        self.speeds.iter().copied().fold(0.0, f64::max)
    }
}

/// One point of a D-decomposition boundary in the `(k_e, k_θ)` plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundaryPoint {
    pub omega: f64,
    pub k_e: f64,
    pub k_theta: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Boundaries {
    /// Complex-root boundary `Δ(jω; K) = 0`, one point per regular ω.
    pub complex: Vec<BoundaryPoint>,
    /// Frequencies whose 2×2 system was singular.
    pub gaps: Vec<f64>,
    /// The real-root boundary `Δ(0; K) = 0` is the line `k_e = value`.
    pub real_root_k_e: f64,
}

/// D-decomposition boundaries in `(k_e, k_θ)` at fixed `k_ω`.
///
/// `Δ(jω; K)` is affine in `(k_e, k_θ)`, so each ω gives a 2×2 real system
/// from its real and imaginary parts.
pub fn d_decomposition_boundaries(
    p: &VehicleParams,
    act: &ActuationParams,
    v0: f64,
    k_omega: f64,
    omegas: &[f64],
) -> Result<Boundaries> {
    if omegas.iter().any(|w| !(*w > 0.0)) || omegas.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidParameter(
            "frequency grid must be strictly positive and increasing".into(),
        ));
    }
    let parts = CharPolyParts::new(p, act, v0)?;
    // Δ(0; K) = k_e · ke(0) since base, kθ and kω all vanish at s = 0.
    let mut out = Boundaries {
        real_root_k_e: 0.0,
        ..Default::default()
    };
    for &w in omegas {
        let s = Complex64::new(0.0, w);
        let c = parts.base.eval_complex(s) + parts.k_omega.eval_complex(s) * k_omega;
        let pe = parts.k_e.eval_complex(s);
        let pt = parts.k_theta.eval_complex(s);
        let det = pe.re * pt.im - pt.re * pe.im;
        if det.abs() <= 1e-12 * pe.norm() * pt.norm() {
            log::debug!("singular D-decomposition system at ω = {w}");
            out.gaps.push(w);
            continue;
        }
        let k_e = (-c.re * pt.im + pt.re * c.im) / det;
        let k_theta = (-pe.re * c.im + c.re * pe.im) / det;
        out.complex.push(BoundaryPoint {
            omega: w,
            k_e,
            k_theta,
        });
    }
    Ok(out)
}

/// Logarithmically spaced frequencies, both ends included.
pub fn log_grid(min: f64, max: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![min];
    }
    let (lo, hi) = (min.log10(), max.log10());
    (0..n)
        .map(|i| 10f64.powf(lo + (hi - lo) * i as f64 / (n - 1) as f64))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Axis {
    pub min: f64,
    pub max: f64,
    pub cells: usize,
}

impl Axis {
    pub fn width(&self) -> f64 {
        (self.max - self.min) / self.cells as f64
    }

    pub fn center(&self, i: usize) -> f64 {
        self.min + (i as f64 + 0.5) * self.width()
    }

    pub fn vertex(&self, i: usize) -> f64 {
        self.min + i as f64 * self.width()
    }

    /// Index of the cell containing `x`, if inside the axis.
    pub fn locate(&self, x: f64) -> Option<usize> {
        if !(x >= self.min && x <= self.max) {
            return None;
        }
        Some((((x - self.min) / self.width()) as usize).min(self.cells - 1))
    }
}

/// Gain-space grid: cells over `(k_e, k_θ)` on each `k_ω` slice.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub k_e: Axis,
    pub k_theta: Axis,
    pub k_omega: Vec<f64>,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec {
            k_e: Axis {
                min: 0.0,
                max: 0.5,
                cells: 200,
            },
            k_theta: Axis {
                min: 0.0,
                max: 3.0,
                cells: 200,
            },
            k_omega: (0..11).map(|i| i as f64 / 20.0).collect(),
        }
    }
}

impl GridSpec {
    pub fn validate(&self) -> Result<()> {
        for (name, ax) in [("k_e", &self.k_e), ("k_theta", &self.k_theta)] {
            if ax.cells == 0 || !(ax.max > ax.min) || !ax.min.is_finite() || !ax.max.is_finite() {
                return Err(Error::InvalidParameter(format!("bad {name} axis {ax:?}")));
            }
        }
        if self.k_omega.is_empty() || self.k_omega.iter().any(|k| !k.is_finite()) {
            return Err(Error::InvalidParameter("k_omega slices must be finite and non-empty".into()));
        }
        Ok(())
    }

    /// Adds a `k_ω` slice unless an equal one exists; keeps slices sorted.
    pub fn with_slice(mut self, k_omega: f64) -> Self {
        if !self.k_omega.iter().any(|k| (k - k_omega).abs() <= 1e-12) {
            self.k_omega.push(k_omega);
            self.k_omega.sort_by(f64::total_cmp);
        }
        self
    }

    pub fn cells_per_slice(&self) -> usize {
        self.k_e.cells * self.k_theta.cells
    }

    fn slice_index(&self, k_omega: f64) -> Option<usize> {
        self.k_omega.iter().position(|k| (k - k_omega).abs() <= 1e-12)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CellClass {
    Stable,
    Unstable,
    /// Center and corners disagree: a boundary crosses the cell.
    Boundary,
}

impl fmt::Display for CellClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CellClass::Stable => "stable",
            CellClass::Unstable => "unstable",
            CellClass::Boundary => "boundary",
        })
    }
}

/// Classified gain grid at one speed, or the intersection over several.
#[derive(Debug, Clone, PartialEq)]
pub struct StabilityRegion {
    pub grid: GridSpec,
    /// `None` for an intersection.
    pub v0: Option<f64>,
    /// Indexed `[slice][k_e][k_theta]`, row-major.
    pub cells: Vec<CellClass>,
}

impl StabilityRegion {
    fn index(&self, slice: usize, ie: usize, it: usize) -> usize {
        (slice * self.grid.k_e.cells + ie) * self.grid.k_theta.cells + it
    }

    pub fn cell(&self, slice: usize, ie: usize, it: usize) -> CellClass {
        self.cells[self.index(slice, ie, it)]
    }

    /// Class of the cell containing `k`, whose `k_ω` must be one of the grid
    /// slices.
    pub fn classify(&self, k: &GainVector) -> Option<CellClass> {
        let s = self.grid.slice_index(k.k_omega)?;
        let ie = self.grid.k_e.locate(k.k_e)?;
        let it = self.grid.k_theta.locate(k.k_theta)?;
        Some(self.cell(s, ie, it))
    }

    pub fn count(&self, class: CellClass) -> usize {
        self.cells.iter().filter(|c| **c == class).count()
    }

    /// Cell-center gain vectors paired with their class.
    pub fn iter_cells(&self) -> impl Iterator<Item = (GainVector, CellClass)> + '_ {
        let g = &self.grid;
        g.k_omega.iter().enumerate().flat_map(move |(s, &kw)| {
            (0..g.k_e.cells).flat_map(move |ie| {
                (0..g.k_theta.cells).map(move |it| {
                    (
                        GainVector::new(g.k_e.center(ie), g.k_theta.center(it), kw),
                        self.cell(s, ie, it),
                    )
                })
            })
        })
    }
}

const CSV_HEADER: &str = "k_e,k_theta,k_omega,v0,class";

fn save_with<F>(path: &Path, write: F) -> Result<()>
where
    F: FnOnce(&mut std::io::BufWriter<std::fs::File>) -> std::io::Result<()>,
{
    let f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = std::io::BufWriter::new(f);
    write(&mut w).map_err(|e| Error::io(path, e))?;
    w.flush().map_err(|e| Error::io(path, e))
}

impl StabilityRegion {
    fn write_rows(&self, mut w: impl Write) -> std::io::Result<()> {
        let v0 = self
            .v0
            .map_or_else(|| "intersection".to_string(), |v| v.to_string());
        for (k, c) in self.iter_cells() {
            writeln!(w, "{},{},{},{},{}", k.k_e, k.k_theta, k.k_omega, v0, c)?;
        }
        Ok(())
    }

    /// Same layout as [`StabilizingSet::write_csv`], this region only.
    pub fn write_csv(&self, mut w: impl Write) -> std::io::Result<()> {
        writeln!(w, "{CSV_HEADER}")?;
        self.write_rows(w)
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        save_with(path.as_ref(), |w| self.write_csv(w))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StabilizingSet {
    pub per_speed: Vec<StabilityRegion>,
    pub intersection: StabilityRegion,
}

impl StabilizingSet {
    pub fn intersection_is_empty(&self) -> bool {
        self.intersection.count(CellClass::Stable) == 0
    }

    /// Writes `k_e,k_theta,k_omega,v0,class` rows for every speed and for the
    /// intersection (`v0 = intersection`).
    pub fn write_csv(&self, mut w: impl Write) -> std::io::Result<()> {
        writeln!(w, "{CSV_HEADER}")?;
        for region in self.per_speed.iter().chain(std::iter::once(&self.intersection)) {
            region.write_rows(&mut w)?;
        }
        Ok(())
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        save_with(path.as_ref(), |w| self.write_csv(w))
    }
}

fn classify_region(
    parts: &CharPolyParts,
    grid: &GridSpec,
    v0: f64,
    margin: f64,
    exec: Exec,
) -> StabilityRegion {
    let (ne, nt) = (grid.k_e.cells, grid.k_theta.cells);
    let test = |k: GainVector| -> bool {
        let c = parts.coeffs7(&k);
        if margin != 0.0 {
            hurwitz_coeffs(Poly::new(c.to_vec()).shift(-margin).coeffs())
        } else {
            hurwitz_coeffs(&c)
        }
    };
    // One row of work per (slice, k_e index) keeps the reduction order fixed.
    let rows = grid.k_omega.len() * ne;
    let per_row: Vec<Vec<CellClass>> = exec.map_range(rows, |row| {
        let (s, ie) = (row / ne, row % ne);
        let kw = grid.k_omega[s];
        let ke_lo = grid.k_e.vertex(ie);
        let ke_hi = grid.k_e.vertex(ie + 1);
        let ke_c = grid.k_e.center(ie);
        let lower: Vec<bool> = (0..=nt)
            .map(|it| test(GainVector::new(ke_lo, grid.k_theta.vertex(it), kw)))
            .collect();
        let upper: Vec<bool> = (0..=nt)
            .map(|it| test(GainVector::new(ke_hi, grid.k_theta.vertex(it), kw)))
            .collect();
        (0..nt)
            .map(|it| {
                let center = test(GainVector::new(ke_c, grid.k_theta.center(it), kw));
                let corners = [lower[it], lower[it + 1], upper[it], upper[it + 1]];
                if corners.iter().all(|&c| c == center) {
                    if center {
                        CellClass::Stable
                    } else {
                        CellClass::Unstable
                    }
                } else {
                    CellClass::Boundary
                }
            })
            .collect()
    });
    StabilityRegion {
        grid: grid.clone(),
        v0: Some(v0),
        cells: per_row.into_iter().flatten().collect(),
    }
}

fn intersect(regions: &[StabilityRegion], grid: &GridSpec) -> StabilityRegion {
    let n = regions[0].cells.len();
    let cells = (0..n)
        .map(|i| {
            let classes = regions.iter().map(|r| r.cells[i]);
            if classes.clone().all(|c| c == CellClass::Stable) {
                CellClass::Stable
            } else if classes.clone().any(|c| c == CellClass::Unstable) {
                CellClass::Unstable
            } else {
                CellClass::Boundary
            }
        })
        .collect();
    StabilityRegion {
        grid: grid.clone(),
        v0: None,
        cells,
    }
}

/// Classifies every grid cell at every speed and intersects the results.
pub fn stabilizing_set(
    p: &VehicleParams,
    act: &ActuationParams,
    speeds: &SpeedEnvelope,
    grid: &GridSpec,
    margin: f64,
) -> Result<StabilizingSet> {
    stabilizing_set_with(p, act, speeds, grid, margin, Exec::default())
}

pub fn stabilizing_set_with(
    p: &VehicleParams,
    act: &ActuationParams,
    speeds: &SpeedEnvelope,
    grid: &GridSpec,
    margin: f64,
    exec: Exec,
) -> Result<StabilizingSet> {
    grid.validate()?;
    let per_speed = speeds
        .speeds()
        .iter()
        .map(|&v| Ok(classify_region(&CharPolyParts::new(p, act, v)?, grid, v, margin, exec)))
        .collect::<Result<Vec<_>>>()?;
    let intersection = intersect(&per_speed, grid);
    Ok(StabilizingSet {
        per_speed,
        intersection,
    })
}
