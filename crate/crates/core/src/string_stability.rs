//! Frequency-domain certification of lateral string stability.
//!
//! With instantaneous actuation each follower obeys
//! `x_i(s) = G(s)(α x_{i−1}(s) + (1 − α) x_1(s))` with
//! `G(s) = (M₀(s) + B K(s))⁻¹ B K(s)`. If `ρ = ‖αG‖∞ < 1` the inter-vehicle
//! differences form a geometric series and every `‖x_i‖₂` is bounded by a
//! multiple of `‖x_1‖₂` that does not depend on the platoon size.
//!
//! Signal norms are L₂. Because `x = (e_lat, θ̃)` mixes metres and radians,
//! the matrix norms are taken in the scaled coordinates `(e_lat, ℓ·θ̃)`,
//! i.e. on `D G D⁻¹` with `D = diag(1, ℓ)`. Setting `ℓ = 1` gives the plain
//! unscaled norm, which is always reported alongside.

use crate::controller::GainVector;
use crate::exec::Exec;
use crate::vehicle_model::{ErrorDynamics, VehicleParams};
use crate::{Error, Result};
use nalgebra::{Matrix2, Vector2};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::io::Write;
use std::path::Path;

pub type CMatrix2 = Matrix2<Complex64>;
pub type CVector2 = Vector2<Complex64>;

/// Samples whose `M₀ + BK` has a larger 2-norm condition number are skipped.
pub const MAX_CONDITION: f64 = 1e12;

/// Default heading length scale (m).
pub const DEFAULT_HEADING_SCALE: f64 = 12.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FrequencyGrid {
    /// rad/s
    pub min: f64,
    /// rad/s
    pub max: f64,
    pub points: usize,
}

impl Default for FrequencyGrid {
    fn default() -> Self {
        FrequencyGrid {
            min: 1e-3,
            max: 1e3,
            points: 4000,
        }
    }
}

impl FrequencyGrid {
    pub fn validate(&self) -> Result<()> {
        if !(self.min > 0.0 && self.max > self.min && self.max.is_finite()) || self.points < 2 {
            return Err(Error::InvalidParameter(format!("bad frequency grid {self:?}")));
        }
        Ok(())
    }

    pub fn omegas(&self) -> Vec<f64> {
        crate::stability::log_grid(self.min, self.max, self.points)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NormOptions {
    pub grid: FrequencyGrid,
    /// `ℓ` in the scaled state `(e_lat, ℓ·θ̃)` (m).
    pub heading_length_scale: f64,
}

impl Default for NormOptions {
    fn default() -> Self {
        NormOptions {
            grid: FrequencyGrid::default(),
            heading_length_scale: DEFAULT_HEADING_SCALE,
        }
    }
}

impl NormOptions {
    pub fn validate(&self) -> Result<()> {
        self.grid.validate()?;
        if !(self.heading_length_scale > 0.0 && self.heading_length_scale.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "heading_length_scale must be > 0, got {}",
                self.heading_length_scale
            )));
        }
        Ok(())
    }

    pub fn unscaled(mut self) -> Self {
        self.heading_length_scale = 1.0;
        self
    }
}

/// `M₀(s) = M s² + C s + L` of the error dynamics.
pub fn build_m0(s: Complex64, p: &VehicleParams, v0: f64) -> Result<CMatrix2> {
    let d = ErrorDynamics::new(p, v0)?;
    Ok(d.mass.map(|x| s * s * x) + d.damping.map(|x| s * x) + d.stiffness.map(Complex64::from))
}

/// `B` as a column and `K(s) = C_f (k_e, k_θ + k_ω s)` as a row.
fn input_and_gain(s: Complex64, k: &GainVector, p: &VehicleParams) -> (CVector2, CVector2) {
    let b = CVector2::new(Complex64::from(1.0), Complex64::from(p.lf));
    let row = CVector2::new(
        Complex64::from(p.cornering_front * k.k_e),
        (s * k.k_omega + k.k_theta) * p.cornering_front,
    );
    (b, row)
}

/// Rank-one product `B K(s)`.
pub fn bk(s: Complex64, k: &GainVector, p: &VehicleParams) -> CMatrix2 {
    let (b, row) = input_and_gain(s, k, p);
    b * row.transpose()
}

/// Largest singular value of a complex 2×2 matrix.
pub fn sigma_max(a: &CMatrix2) -> f64 {
    let fro2: f64 = a.iter().map(|z| z.norm_sqr()).sum();
    let det = (a[(0, 0)] * a[(1, 1)] - a[(0, 1)] * a[(1, 0)]).norm();
    let disc = (fro2 * fro2 - 4.0 * det * det).max(0.0);
    ((fro2 + disc.sqrt()) / 2.0).sqrt()
}

/// Smallest singular value of a complex 2×2 matrix.
pub fn sigma_min(a: &CMatrix2) -> f64 {
    let s = sigma_max(a);
    if s == 0.0 {
        return 0.0;
    }
    (a[(0, 0)] * a[(1, 1)] - a[(0, 1)] * a[(1, 0)]).norm() / s
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransferMatrixSample {
    /// rad/s
    pub omega: f64,
    pub g: CMatrix2,
    /// `σ_max` of the scaled `G`.
    pub sigma_max: f64,
    /// `σ_max` of the scaled `G − I`.
    pub sigma_max_minus_i: f64,
    /// `M₀ + BK` was too ill-conditioned; the sample carries no data.
    pub singular: bool,
}

/// `D X D⁻¹` with `D = diag(1, ℓ)`.
pub fn scale_matrix(x: &CMatrix2, ell: f64) -> CMatrix2 {
    let mut out = *x;
    out[(0, 1)] /= ell;
    out[(1, 0)] *= ell;
    out
}

/// `G(jω)` by a direct 2×2 solve.
pub fn closed_loop_g(
    omega: f64,
    k: &GainVector,
    p: &VehicleParams,
    v0: f64,
    heading_length_scale: f64,
) -> Result<TransferMatrixSample> {
    let s = Complex64::new(0.0, omega);
    let bk = bk(s, k, p);
    let a = build_m0(s, p, v0)? + bk;
    let cond = sigma_max(&a) / sigma_min(&a);
    let g = if cond.is_finite() && cond <= MAX_CONDITION {
        a.try_inverse().map(|inv| inv * bk)
    } else {
        None
    };
    Ok(match g {
        Some(g) => {
            let gs = scale_matrix(&g, heading_length_scale);
            TransferMatrixSample {
                omega,
                g,
                sigma_max: sigma_max(&gs),
                sigma_max_minus_i: sigma_max(&(gs - CMatrix2::identity())),
                singular: false,
            }
        }
        None => {
            log::warn!("ill-conditioned closed loop at ω = {omega} (condition {cond:e}), sample skipped");
            TransferMatrixSample {
                omega,
                g: CMatrix2::zeros(),
                sigma_max: 0.0,
                sigma_max_minus_i: 0.0,
                singular: true,
            }
        }
    })
}

/// Frequency response of `G` over the grid.
pub fn frequency_response(
    k: &GainVector,
    p: &VehicleParams,
    v0: f64,
    opts: &NormOptions,
    exec: Exec,
) -> Result<Vec<TransferMatrixSample>> {
    opts.validate()?;
    // Surface parameter errors before going parallel.
    ErrorDynamics::new(p, v0)?;
    let omegas = opts.grid.omegas();
    exec.map(&omegas, |&w| closed_loop_g(w, k, p, v0, opts.heading_length_scale))
        .into_iter()
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Peak {
    pub norm: f64,
    /// rad/s
    pub omega: f64,
}

/// Largest sample (lowest ω on ties), then one golden-section pass in log ω
/// over the neighbouring grid interval.
fn peak_of<F>(omegas: &[f64], values: &[Option<f64>], f: F) -> Result<Peak>
where
    F: Fn(f64) -> Option<f64>,
{
    let mut best: Option<(usize, f64)> = None;
    for (i, v) in values.iter().enumerate() {
        if let Some(v) = *v {
            if best.is_none_or(|(_, b)| v > b) {
                best = Some((i, v));
            }
        }
    }
    let (i, v) = best.ok_or(Error::AllSamplesSingular)?;
    let lo = omegas[i.saturating_sub(1)].ln();
    let hi = omegas[(i + 1).min(omegas.len() - 1)].ln();
    let mut peak = Peak {
        norm: v,
        omega: omegas[i],
    };
    if hi > lo {
        let (w, val) = golden_max(|x| f(x.exp()).unwrap_or(f64::NEG_INFINITY), lo, hi, 60);
        if val > peak.norm {
            peak = Peak {
                norm: val,
                omega: w.exp(),
            };
        }
    }
    Ok(peak)
}

fn golden_max<F: Fn(f64) -> f64>(f: F, mut a: f64, mut b: f64, iters: usize) -> (f64, f64) {
    let r = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..iters {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = f(d);
        }
    }
    if fc >= fd {
        (c, fc)
    } else {
        (d, fd)
    }
}

/// `(‖G‖∞, ‖G − I‖∞)` in the scaled coordinates.
pub fn hinf_norms(
    k: &GainVector,
    p: &VehicleParams,
    v0: f64,
    opts: &NormOptions,
    exec: Exec,
) -> Result<(Peak, Peak)> {
    let samples = frequency_response(k, p, v0, opts, exec)?;
    let omegas: Vec<f64> = samples.iter().map(|s| s.omega).collect();
    let ell = opts.heading_length_scale;
    let pick = |minus_i: bool| {
        move |s: &TransferMatrixSample| {
            (!s.singular).then_some(if minus_i { s.sigma_max_minus_i } else { s.sigma_max })
        }
    };
    let eval = |minus_i: bool| {
        move |w: f64| {
            closed_loop_g(w, k, p, v0, ell)
                .ok()
                .and_then(|s| pick(minus_i)(&s))
        }
    };
    let g_vals: Vec<Option<f64>> = samples.iter().map(pick(false)).collect();
    let gi_vals: Vec<Option<f64>> = samples.iter().map(pick(true)).collect();
    Ok((
        peak_of(&omegas, &g_vals, eval(false))?,
        peak_of(&omegas, &gi_vals, eval(true))?,
    ))
}

/// `‖G‖∞` in the scaled coordinates.
pub fn hinf_norm(k: &GainVector, p: &VehicleParams, v0: f64, opts: &NormOptions) -> Result<Peak> {
    Ok(hinf_norms(k, p, v0, opts, Exec::default())?.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Certified,
    NotCertified,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StringStabilityReport {
    pub alpha: f64,
    /// `‖αG‖∞` (scaled).
    pub rho: f64,
    /// `‖G‖∞` (scaled).
    pub g_norm: f64,
    /// `‖G − I‖∞` (scaled).
    pub g_minus_i_norm: f64,
    /// `‖G − I‖∞ / (1 − ρ)`, present iff `ρ < 1`.
    pub bound_m: Option<f64>,
    /// `1 + ‖G − I‖∞ / (1 − ρ)`: the bound that also accounts for the
    /// `x_1` term when summing the differences.
    pub bound_m_strict: Option<f64>,
    /// Frequency of the `‖G‖∞` peak (rad/s).
    pub peak_omega: f64,
    pub g_minus_i_peak_omega: f64,
    pub verdict: Verdict,
    pub heading_length_scale: f64,
    /// `‖αG‖∞` with `ℓ = 1`.
    pub rho_unscaled: f64,
    pub v0: f64,
    pub gains: GainVector,
}

impl StringStabilityReport {
    fn assemble(
        alpha: f64,
        g: Peak,
        gi: Peak,
        g_unscaled: Peak,
        opts: &NormOptions,
        v0: f64,
        gains: GainVector,
    ) -> Self {
        let rho = alpha * g.norm;
        let (bound_m, bound_m_strict, verdict) = if rho < 1.0 {
            let m = gi.norm / (1.0 - rho);
            (Some(m), Some(1.0 + m), Verdict::Certified)
        } else {
            (None, None, Verdict::NotCertified)
        };
        StringStabilityReport {
            alpha,
            rho,
            g_norm: g.norm,
            g_minus_i_norm: gi.norm,
            bound_m,
            bound_m_strict,
            peak_omega: g.omega,
            g_minus_i_peak_omega: gi.omega,
            verdict,
            heading_length_scale: opts.heading_length_scale,
            rho_unscaled: alpha * g_unscaled.norm,
            v0,
            gains,
        }
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::InvalidParameter(format!("alpha must lie in [0, 1], got {alpha}")));
    }
    Ok(())
}

pub fn certify(
    k: &GainVector,
    alpha: f64,
    p: &VehicleParams,
    v0: f64,
    opts: &NormOptions,
) -> Result<StringStabilityReport> {
    Ok(certify_sweep(k, &[alpha], p, v0, opts, Exec::default())?.remove(0))
}

/// Certifies several weights; the norms are computed once.
pub fn certify_sweep(
    k: &GainVector,
    alphas: &[f64],
    p: &VehicleParams,
    v0: f64,
    opts: &NormOptions,
    exec: Exec,
) -> Result<Vec<StringStabilityReport>> {
    for &a in alphas {
        check_alpha(a)?;
    }
    let (g, gi) = hinf_norms(k, p, v0, opts, exec)?;
    let g_unscaled = if opts.heading_length_scale == 1.0 {
        g
    } else {
        hinf_norms(k, p, v0, &opts.unscaled(), exec)?.0
    };
    Ok(alphas
        .iter()
        .map(|&a| StringStabilityReport::assemble(a, g, gi, g_unscaled, opts, v0, *k))
        .collect())
}

/// Per-vehicle spectra, indexed `[vehicle][frequency]`; vehicle 0 is `x_1`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainSpectra {
    pub omegas: Vec<f64>,
    pub recursion: Vec<Vec<CVector2>>,
    pub closed_form: Vec<Vec<CVector2>>,
}

impl ChainSpectra {
    /// Largest relative disagreement between the two computations.
    pub fn max_relative_gap(&self) -> f64 {
        let mut worst = 0.0f64;
        for (r, c) in self.recursion.iter().zip(&self.closed_form) {
            for (a, b) in r.iter().zip(c) {
                let scale = a.norm().max(b.norm());
                if scale > 0.0 {
                    worst = worst.max((a - b).norm() / scale);
                }
            }
        }
        worst
    }

    /// Largest per-vehicle `‖recursion − closed form‖₂ / ‖recursion‖₂`, with
    /// each vehicle's spectrum taken as one vector over the grid.
    pub fn spectral_relative_gap(&self) -> f64 {
        let mut worst = 0.0f64;
        for (r, c) in self.recursion.iter().zip(&self.closed_form) {
            let diff: f64 = r.iter().zip(c).map(|(a, b)| (a - b).norm_squared()).sum();
            let size: f64 = r.iter().map(|a| a.norm_squared()).sum();
            if size > 0.0 {
                worst = worst.max((diff / size).sqrt());
            }
        }
        worst
    }
}

/// Spectra of `x_1 … x_N` from the per-vehicle recursion and from the closed
/// form `x_i = x_1 + Σ_{j=2..i} (αG)^{j−2} (G − I) x_1`.
pub fn propagate_chain(
    x1: &[CVector2],
    omegas: &[f64],
    n: usize,
    alpha: f64,
    k: &GainVector,
    p: &VehicleParams,
    v0: f64,
) -> Result<ChainSpectra> {
    if n < 2 {
        return Err(Error::InvalidParameter(format!("platoon size must be ≥ 2, got {n}")));
    }
    if x1.len() != omegas.len() {
        return Err(Error::InvalidParameter("spectrum and grid lengths differ".into()));
    }
    check_alpha(alpha)?;
    let mut recursion = vec![Vec::with_capacity(omegas.len()); n];
    let mut closed_form = vec![Vec::with_capacity(omegas.len()); n];
    for (&w, &x) in omegas.iter().zip(x1) {
        let g = closed_loop_g(w, k, p, v0, 1.0)?.g;
        let a = Complex64::from(alpha);
        let b = Complex64::from(1.0 - alpha);

        recursion[0].push(x);
        let mut prev = g * x;
        recursion[1].push(prev);
        for slot in recursion.iter_mut().skip(2) {
            prev = g * (prev * a + x * b);
            slot.push(prev);
        }

        let ag = g.map(|z| z * a);
        let mut diff = (g - CMatrix2::identity()) * x;
        let mut acc = x;
        closed_form[0].push(x);
        for slot in closed_form.iter_mut().skip(1) {
            acc += diff;
            slot.push(acc);
            diff = ag * diff;
        }
    }
    Ok(ChainSpectra {
        omegas: omegas.to_vec(),
        recursion,
        closed_form,
    })
}

/// Writes `omega,sigma_g,sigma_g_minus_i,singular` rows.
pub fn write_response_csv(samples: &[TransferMatrixSample], mut w: impl Write) -> std::io::Result<()> {
    writeln!(w, "omega,sigma_g,sigma_g_minus_i,singular")?;
    for s in samples {
        writeln!(w, "{},{},{},{}", s.omega, s.sigma_max, s.sigma_max_minus_i, s.singular)?;
    }
    Ok(())
}

pub fn save_response_csv(samples: &[TransferMatrixSample], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = std::io::BufWriter::new(f);
    write_response_csv(samples, &mut w).map_err(|e| Error::io(path, e))?;
    w.flush().map_err(|e| Error::io(path, e))
}
