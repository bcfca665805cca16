use elc_core::exec::Exec;
use elc_core::io::output::{write_json, write_sim_output, write_text};
use elc_core::io::svg::{fit_overlay, region_slice, LinePlot};
use elc_core::io::ResolvedConfig;
use elc_core::platoon::{perturbation_experiment, run_scenario, SimOutput};
use elc_core::stability::{
    char_poly, d_decomposition_boundaries, is_hurwitz, stabilizing_set, CellClass, GridSpec,
};
use elc_core::string_stability::{certify_sweep, frequency_response, save_response_csv, StringStabilityReport};
use elc_core::trajectory::{fit_points, Point};
use elc_core::{Error, Result};
use serde::Serialize;
use std::io::Write;
use std::path::{Path, PathBuf};

type Outputs = Vec<PathBuf>;

fn svg(dir: &Path, name: &str, text: &str, outputs: &mut Outputs) -> Result<()> {
    let path = dir.join(name);
    write_text(&path, text)?;
    outputs.push(path);
    Ok(())
}

fn json<T: Serialize>(dir: &Path, name: &str, value: &T, outputs: &mut Outputs) -> Result<()> {
    let path = dir.join(name);
    write_json(&path, value)?;
    outputs.push(path);
    Ok(())
}

fn csv_file<F>(dir: &Path, name: &str, outputs: &mut Outputs, write: F) -> Result<()>
where
    F: FnOnce(&mut dyn Write) -> std::io::Result<()>,
{
    let path = dir.join(name);
    let f = std::fs::File::create(&path).map_err(|e| io_err(&path, e))?;
    let mut w = std::io::BufWriter::new(f);
    write(&mut w).map_err(|e| io_err(&path, e))?;
    w.flush().map_err(|e| io_err(&path, e))?;
    outputs.push(path);
    Ok(())
}

fn io_err(path: &Path, source: std::io::Error) -> Error {
    Error::Io {
        path: path.display().to_string(),
        source,
    }
}

fn series_plots(out: &SimOutput, dir: &Path, outputs: &mut Outputs) -> Result<()> {
    let mut e_lat = LinePlot::new("Lateral error", "t (s)", "e_lat (m)");
    let mut delta = LinePlot::new("Commanded steering", "t (s)", "delta_c (rad)");
    let mut paths = LinePlot::new("Vehicle paths", "X (m)", "Y (m)");
    for v in &out.vehicles {
        let label = format!("vehicle {}", v.id);
        let zip = |a: &[f64], b: &[f64]| a.iter().copied().zip(b.iter().copied()).collect::<Vec<_>>();
        e_lat = e_lat.series(label.clone(), zip(&v.t, &v.e_lat));
        delta = delta.series(label.clone(), zip(&v.t, &v.delta_c));
        paths = paths.series(label, zip(&v.x, &v.y));
    }
    svg(dir, "e_lat.svg", &e_lat.render(), outputs)?;
    svg(dir, "delta_c.svg", &delta.render(), outputs)?;
    svg(dir, "paths.svg", &paths.render(), outputs)
}

pub fn simulate(cfg: &ResolvedConfig, dir: &Path) -> Result<Outputs> {
    let out = run_scenario(&cfg.scenario)?;
    for e in &out.events {
        log::info!("t = {:.3} s, vehicle {}: {}", e.t, e.vehicle, e.message);
    }
    let mut outputs = write_sim_output(&out, dir)?;
    series_plots(&out, dir, &mut outputs)?;
    for s in &out.summaries {
        println!(
            "vehicle {:2}: max |e_lat| = {:.4} m, max |delta_c| = {:.5} rad",
            s.id, s.max_abs_e_lat, s.max_abs_delta_c
        );
    }
    Ok(outputs)
}

#[derive(Debug, Serialize)]
struct SpeedCheck {
    v0: f64,
    /// Grid class of the cell holding the controller gains.
    cell: Option<String>,
    /// Direct Hurwitz test at the controller gains.
    hurwitz: bool,
}

#[derive(Debug, Serialize)]
struct RegionSummary {
    gains: elc_core::controller::GainVector,
    k_omega_slices: Vec<f64>,
    per_speed: Vec<SpeedCheck>,
    intersection_cell: Option<String>,
    intersection_stable_cells: usize,
    intersection_boundary_cells: usize,
    intersection_unstable_cells: usize,
}

pub fn stability_region(
    cfg: &ResolvedConfig,
    dir: &Path,
    k_omega: &[f64],
    per_speed: bool,
) -> Result<Outputs> {
    let grid = if k_omega.is_empty() {
        cfg.grid.clone()
    } else {
        GridSpec {
            k_omega: k_omega.to_vec(),
            ..cfg.grid.clone()
        }
    };
    grid.validate()?;
    let p = &cfg.scenario.vehicle;
    let act = &cfg.scenario.actuation;
    let gains = cfg.scenario.controller.gains;
    let set = stabilizing_set(p, act, &cfg.speeds, &grid, cfg.margin)?;

    let mut outputs = Vec::new();
    let path = dir.join("intersection.csv");
    set.intersection.save_csv(&path)?;
    outputs.push(path);
    if per_speed {
        for (i, region) in set.per_speed.iter().enumerate() {
            let path = dir.join(format!("region_speed_{:02}.csv", i + 1));
            region.save_csv(&path)?;
            outputs.push(path);
        }
    }

    let omegas = cfg.boundary_grid.omegas();
    let mut boundaries = Vec::new();
    for &v in cfg.speeds.speeds() {
        for &kw in &grid.k_omega {
            boundaries.push((v, kw, d_decomposition_boundaries(p, act, v, kw, &omegas)?));
        }
    }
    csv_file(dir, "boundaries.csv", &mut outputs, |w| {
        writeln!(w, "v0,k_omega,omega,k_e,k_theta")?;
        for (v, kw, b) in &boundaries {
            for pt in &b.complex {
                writeln!(w, "{v},{kw},{},{},{}", pt.omega, pt.k_e, pt.k_theta)?;
            }
        }
        Ok(())
    })?;

    for (slice, kw) in grid.k_omega.iter().enumerate() {
        let marker = ((kw - gains.k_omega).abs() < 1e-12).then_some((gains.k_e, gains.k_theta));
        svg(
            dir,
            &format!("intersection_kw_{kw}.svg"),
            &region_slice(&set.intersection, slice, marker),
            &mut outputs,
        )?;
    }

    let per_speed = set
        .per_speed
        .iter()
        .map(|r| {
            let v0 = r.v0.expect("per-speed regions carry their speed");
            Ok(SpeedCheck {
                v0,
                cell: r.classify(&gains).map(|c| c.to_string()),
                hurwitz: is_hurwitz(&char_poly(&gains, p, act, v0)?.poly, cfg.margin)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let summary = RegionSummary {
        gains,
        k_omega_slices: grid.k_omega.clone(),
        intersection_cell: set.intersection.classify(&gains).map(|c| c.to_string()),
        intersection_stable_cells: set.intersection.count(CellClass::Stable),
        intersection_boundary_cells: set.intersection.count(CellClass::Boundary),
        intersection_unstable_cells: set.intersection.count(CellClass::Unstable),
        per_speed,
    };
    println!(
        "gains ({}, {}, {}): intersection cell {}, {} stable cells",
        gains.k_e,
        gains.k_theta,
        gains.k_omega,
        summary.intersection_cell.as_deref().unwrap_or("outside grid"),
        summary.intersection_stable_cells
    );
    json(dir, "stability_summary.json", &summary, &mut outputs)?;
    Ok(outputs)
}

fn write_report_csv(reports: &[StringStabilityReport], w: &mut dyn Write) -> std::io::Result<()> {
    writeln!(
        w,
        "alpha,rho,g_norm,g_minus_i_norm,bound_m,bound_m_strict,peak_omega,verdict,rho_unscaled"
    )?;
    let opt = |v: Option<f64>| v.map_or_else(String::new, |v| v.to_string());
    for r in reports {
        let verdict = match r.verdict {
            elc_core::string_stability::Verdict::Certified => "certified",
            elc_core::string_stability::Verdict::NotCertified => "not_certified",
        };
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{}",
            r.alpha,
            r.rho,
            r.g_norm,
            r.g_minus_i_norm,
            opt(r.bound_m),
            opt(r.bound_m_strict),
            r.peak_omega,
            verdict,
            r.rho_unscaled
        )?;
    }
    Ok(())
}

pub fn string_stability(cfg: &ResolvedConfig, dir: &Path, alphas: &[f64]) -> Result<Outputs> {
    let alphas = if alphas.is_empty() { &cfg.alphas[..] } else { alphas };
    let s = &cfg.scenario;
    let k = s.controller.gains;
    let reports = certify_sweep(&k, alphas, &s.vehicle, s.v0, &cfg.norms, Exec::default())?;
    let mut outputs = Vec::new();
    json(dir, "report.json", &reports, &mut outputs)?;
    csv_file(dir, "report.csv", &mut outputs, |w| write_report_csv(&reports, w))?;

    let samples = frequency_response(&k, &s.vehicle, s.v0, &cfg.norms, Exec::default())?;
    let path = dir.join("response.csv");
    save_response_csv(&samples, &path)?;
    outputs.push(path);
    let ok: Vec<_> = samples.iter().filter(|x| !x.singular).collect();
    let mut plot = LinePlot::new("Closed-loop singular values", "omega (rad/s)", "sigma_max")
        .log_x()
        .series("G", ok.iter().map(|x| (x.omega, x.sigma_max)).collect())
        .series("G - I", ok.iter().map(|x| (x.omega, x.sigma_max_minus_i)).collect());
    for a in alphas.iter().filter(|a| **a != 0.0 && **a != 1.0) {
        plot = plot.series(
            format!("alpha G, alpha = {a}"),
            ok.iter().map(|x| (x.omega, a * x.sigma_max)).collect(),
        );
    }
    svg(dir, "response.svg", &plot.render(), &mut outputs)?;

    for r in &reports {
        println!(
            "alpha = {:.3}: rho = {:.4} (unscaled {:.4}), {:?}{}",
            r.alpha,
            r.rho,
            r.rho_unscaled,
            r.verdict,
            r.bound_m.map_or_else(String::new, |m| format!(", M = {m:.4}"))
        );
    }
    Ok(outputs)
}

pub fn read_trace(path: &Path) -> Result<Vec<Point>> {
    let mut rdr = csv::Reader::from_path(path)
        .map_err(|e| Error::Config(format!("cannot read trace {}: {e}", path.display())))?;
    let headers = rdr.headers()?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h.trim().eq_ignore_ascii_case(name))
            .ok_or_else(|| Error::Config(format!("{}: missing `{name}` column", path.display())))
    };
    let (ix, iy) = (col("x")?, col("y")?);
    let mut points = Vec::new();
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let field = |i: usize| -> Result<f64> {
            rec.get(i).unwrap_or("").trim().parse().map_err(|_| {
                Error::Config(format!("{}: line {}: not a number", path.display(), row + 2))
            })
        };
        points.push(Point::new(field(ix)?, field(iy)?));
    }
    Ok(points)
}

#[derive(Debug, Serialize)]
struct FitReport {
    segments: Vec<elc_core::trajectory::Segment>,
    /// Inclusive input-point ranges per segment (after dropping duplicates).
    ranges: Vec<(usize, usize)>,
    length: f64,
    max_residual: f64,
}

pub fn fit_trajectory(
    cfg: &ResolvedConfig,
    dir: &Path,
    input: &Path,
    threshold: Option<f64>,
) -> Result<Outputs> {
    let points = read_trace(input)?;
    let mut params = cfg.scenario.fit;
    if let Some(t) = threshold {
        params.threshold = t;
    }
    let (traj, ranges) = fit_points(&points, &params)?;
    let max_residual = points
        .iter()
        .map(|p| traj.match_point(*p).distance)
        .fold(0.0, f64::max);
    let mut outputs = Vec::new();
    let report = FitReport {
        segments: traj.segments().to_vec(),
        ranges,
        length: traj.length(),
        max_residual,
    };
    json(dir, "segments.json", &report, &mut outputs)?;
    svg(dir, "fit.svg", &fit_overlay(&points, &traj), &mut outputs)?;
    println!(
        "{} points -> {} segments, max residual {:.4} m",
        points.len(),
        report.segments.len(),
        max_residual
    );
    Ok(outputs)
}

#[derive(Debug, Serialize)]
struct PerturbationReport {
    table: elc_core::platoon::AmplificationTable,
    certificate: StringStabilityReport,
    /// `max_ratio ≤ bound_m` when a bound exists.
    within_bound: Option<bool>,
}

pub fn perturb(cfg: &ResolvedConfig, dir: &Path) -> Result<Outputs> {
    let scenario = cfg.perturbation_scenario();
    let ell = cfg.norms.heading_length_scale;
    let (table, out) = perturbation_experiment(&scenario, cfg.perturbation.offset, ell)?;
    let k = scenario.controller.gains;
    let certificate = certify_sweep(
        &k,
        &[scenario.controller.alpha],
        &scenario.vehicle,
        scenario.v0,
        &cfg.norms,
        Exec::default(),
    )?
    .remove(0);
    let within_bound = certificate.bound_m.map(|m| table.max_ratio <= m);
    let mut outputs = write_sim_output(&out, dir)?;
    series_plots(&out, dir, &mut outputs)?;
    let ratios = LinePlot::new("L2 amplification", "vehicle", "||x_i|| / ||x_1||").series(
        "ratio",
        table.ratios.iter().enumerate().map(|(i, r)| ((i + 1) as f64, *r)).collect(),
    );
    svg(dir, "amplification.svg", &ratios.render(), &mut outputs)?;
    for (i, (n, r)) in table.norms.iter().zip(&table.ratios).enumerate() {
        println!("vehicle {:2}: ||x|| = {:.5}, ratio {:.4}", i + 1, n, r);
    }
    json(
        dir,
        "perturbation.json",
        &PerturbationReport {
            table,
            certificate,
            within_bound,
        },
        &mut outputs,
    )?;
    Ok(outputs)
}
