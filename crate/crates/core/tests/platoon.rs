use elc_core::io::output::write_sim_output;
use elc_core::platoon::{build_lead_path, run_scenario, LeadPathSpec, ScenarioConfig};

fn short_lane_change(vehicles: usize) -> ScenarioConfig {
    ScenarioConfig {
        vehicles,
        lead_path: LeadPathSpec {
            straight_in: 50.0,
            change_length: 100.0,
            lane_offset: -3.7,
            dwell: 60.0,
            return_length: 100.0,
            straight_out: 60.0,
        },
        ..Default::default()
    }
}

fn files_of(cfg: &ScenarioConfig) -> Vec<(String, Vec<u8>)> {
    let out = run_scenario(cfg).unwrap();
    let dir = tempfile::tempdir().unwrap();
    write_sim_output(&out, dir.path())
        .unwrap()
        .into_iter()
        .map(|p| {
            let name = p.file_name().unwrap().to_string_lossy().into_owned();
            (name, std::fs::read(&p).unwrap())
        })
        .collect()
}

#[test]
fn repeated_runs_are_byte_identical() {
    let cfg = short_lane_change(3);
    let a = files_of(&cfg);
    let b = files_of(&cfg);
    assert_eq!(a.len(), 4);
    for ((na, fa), (nb, fb)) in a.iter().zip(&b) {
        assert_eq!(na, nb);
        assert!(fa == fb, "{na} differs between runs");
    }
}

#[test]
fn lead_follows_the_lane_change() {
    let cfg = short_lane_change(3);
    let out = run_scenario(&cfg).unwrap();
    assert!(out.events.is_empty(), "{:?}", out.events);
    let lead = &out.vehicles[0];
    let y_min = lead.y.iter().copied().fold(f64::INFINITY, f64::min);
    assert!((y_min + 3.7).abs() < 0.05, "lead reached y = {y_min}");
    assert!(lead.y.last().unwrap().abs() < 0.05);

    // Every vehicle stays near the nominal path in the dwell section.
    let nominal = build_lead_path(&cfg.lead_path, cfg.controller.min_radius).unwrap();
    for v in &out.vehicles {
        for (x, y) in v.x.iter().zip(&v.y) {
            if (160.0..200.0).contains(x) {
                assert!((y + 3.7).abs() < 0.1, "vehicle {} at x = {x}: y = {y}", v.id);
            }
        }
        let end = v.x.last().unwrap();
        assert!(*end > 200.0, "vehicle {} stopped at {end}", v.id);
    }
    assert!((nominal.length() - cfg.lead_path.total_length()).abs() < 1.0);
}

#[test]
fn followers_lag_by_spacing() {
    let cfg = short_lane_change(3);
    let out = run_scenario(&cfg).unwrap();
    let last = out.vehicles[0].x.len() - 1;
    for w in out.vehicles.windows(2) {
        let gap = w[0].x[last] - w[1].x[last];
        assert!((gap - cfg.spacing).abs() < 0.5, "gap {gap}");
    }
}
