use approx::assert_relative_eq;
use elc_core::controller::GainVector;
use elc_core::stability::{
    char_poly, d_decomposition_boundaries, is_hurwitz, log_grid, open_loop_quartic,
    stabilizing_set, Axis, CellClass, GridSpec, SpeedEnvelope, DEFAULT_MARGIN,
};
use elc_core::string_stability::{build_m0, CMatrix2};
use elc_core::vehicle_model::{
    actuation_deriv, integrate_error_step, rk4, ActuationParams, ActuationState, ErrorSystemState,
    LateralState, VehicleParams,
};
use nalgebra::{DMatrix, Matrix2};
use num_complex::Complex64;

fn sedan() -> VehicleParams {
    VehicleParams::new(1523.7, 2741.3, 118_000.0, 97_500.0, 1.13, 1.71).unwrap()
}

fn act() -> ActuationParams {
    ActuationParams::new(0.4056, 21.4813).unwrap()
}

/// Matrices of the error dynamics written out from the bicycle model.
fn mcl(p: &VehicleParams, v: f64) -> (Matrix2<f64>, Matrix2<f64>, Matrix2<f64>) {
    let (cf, cr, a, b) = (p.cornering_front, p.cornering_rear, p.lf, p.lr);
    let m = Matrix2::new(p.mass, 0.0, 0.0, p.yaw_inertia);
    let c = Matrix2::new(
        (cf + cr) / v,
        (a * cf - b * cr) / v,
        (a * cf - b * cr) / v,
        (a * a * cf + b * b * cr) / v,
    );
    let l = Matrix2::new(0.0, -(cf + cr), 0.0, -(a * cf - b * cr));
    (m, c, l)
}

fn complex(m: &Matrix2<f64>) -> CMatrix2 {
    m.map(Complex64::from)
}

fn det(m: &CMatrix2) -> Complex64 {
    m[(0, 0)] * m[(1, 1)] - m[(0, 1)] * m[(1, 0)]
}

#[test]
fn pinned_symbolic_coefficients() {
    // Exact rational expansion of det(den·M₀ + ωn² B K) / den.
    let expected = [
        1_055_417_093_613.469_860_0,
        845_118_047_627.565_419_69,
        352_550_042_798.877_147_55,
        50_069_854_324.971_156_352,
        3_552_192_472.231_797_201_3,
        145_313_705.195_989_862_50,
        4_176_918.81,
    ];
    let cp = char_poly(&GainVector::new(0.07, 0.85, 0.11), &sedan(), &act(), 17.3).unwrap();
    assert_eq!(cp.poly.degree(), 6);
    for (c, e) in cp.poly.coeffs().iter().zip(expected) {
        assert_relative_eq!(*c, e, max_relative = 1e-12);
    }
    assert_relative_eq!(cp.monic().leading(), 1.0);
}

#[test]
fn char_poly_is_closed_loop_determinant() {
    let p = sedan();
    let a = act();
    let wn2 = a.natural_frequency.powi(2);
    for (v, k) in [
        (5.0, GainVector::new(0.06, 0.96, 0.08)),
        (17.3, GainVector::new(0.2, 0.3, 0.0)),
        (30.0, GainVector::new(0.01, 2.5, 0.4)),
    ] {
        let cp = char_poly(&k, &p, &a, v).unwrap();
        let (m, c, l) = mcl(&p, v);
        for s in [
            Complex64::new(0.3, 1.7),
            Complex64::new(-2.0, 0.5),
            Complex64::new(0.0, 12.0),
            Complex64::new(1.1, -4.0),
        ] {
            let den = s * s + s * (2.0 * a.damping_ratio * a.natural_frequency) + wn2;
            let m0 = complex(&m) * (s * s) + complex(&c) * s + complex(&l);
            let b = nalgebra::Vector2::new(Complex64::from(1.0), Complex64::from(p.lf));
            let row = nalgebra::Vector2::new(
                Complex64::from(p.cornering_front * k.k_e),
                (s * k.k_omega + k.k_theta) * p.cornering_front,
            );
            let closed = m0 * den + b * row.transpose() * Complex64::from(wn2);
            let oracle = det(&closed) / den;
            let got = cp.poly.eval_complex(s);
            assert!((got - oracle).norm() <= 1e-10 * oracle.norm(), "{got} vs {oracle}");
        }
    }
}

#[test]
fn m0_matches_bicycle_matrices_and_quartic() {
    let p = sedan();
    for v in [4.47, 17.3, 29.95] {
        let (m, c, l) = mcl(&p, v);
        let quartic = open_loop_quartic(&p, v);
        for s in [Complex64::new(0.0, 0.7), Complex64::new(-1.5, 3.0), Complex64::new(2.0, 0.0)] {
            let m0 = build_m0(s, &p, v).unwrap();
            let direct = complex(&m) * (s * s) + complex(&c) * s + complex(&l);
            assert!((m0 - direct).norm() <= 1e-12 * direct.norm());
            let d = det(&m0);
            assert!((d - quartic.eval_complex(s)).norm() <= 1e-10 * d.norm());
        }
    }
}

#[test]
fn coefficients_are_quadratic_in_inverse_speed() {
    let p = sedan();
    let k = GainVector::new(0.06, 0.96, 0.08);
    let gammas = [0.02, 0.05, 0.08, 0.11, 0.14];
    let coeffs: Vec<Vec<f64>> = gammas
        .iter()
        .map(|g| char_poly(&k, &p, &act(), 1.0 / g).unwrap().poly.coeffs().to_vec())
        .collect();
    for i in 0..7 {
        let c: Vec<f64> = coeffs.iter().map(|c| c[i]).collect();
        let scale = c.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        // Third differences of a quadratic on an even grid vanish.
        for w in c.windows(4) {
            let d3 = w[3] - 3.0 * w[2] + 3.0 * w[1] - w[0];
            assert!(d3.abs() <= 1e-9 * scale, "coefficient {i}: {d3}");
        }
    }
}

#[test]
fn boundary_points_are_imaginary_axis_roots() {
    let p = sedan();
    let a = act();
    let omegas = log_grid(0.05, 200.0, 300);
    for v in [5.0, 20.0] {
        let b = d_decomposition_boundaries(&p, &a, v, 0.1, &omegas).unwrap();
        assert_eq!(b.real_root_k_e, 0.0);
        assert!(b.complex.len() + b.gaps.len() == omegas.len());
        for pt in &b.complex {
            let cp = char_poly(&GainVector::new(pt.k_e, pt.k_theta, 0.1), &p, &a, v).unwrap();
            let s = Complex64::new(0.0, pt.omega);
            let val = cp.poly.eval_complex(s).norm();
            let scale: f64 = cp
                .poly
                .coeffs()
                .iter()
                .enumerate()
                .map(|(i, c)| c.abs() * pt.omega.powi(i as i32))
                .sum();
            assert!(val <= 1e-9 * scale, "ω = {}: {val} vs {scale}", pt.omega);
        }
    }
}

fn small_grid() -> GridSpec {
    GridSpec {
        k_e: Axis {
            min: -0.05,
            max: 0.5,
            cells: 44,
        },
        k_theta: Axis {
            min: 0.0,
            max: 3.0,
            cells: 40,
        },
        k_omega: vec![0.0, 0.08, 0.3],
    }
}

#[test]
fn grid_classes_agree_with_direct_tests() {
    let p = sedan();
    let a = act();
    let speeds = SpeedEnvelope::new(vec![5.0, 25.0]).unwrap();
    let set = stabilizing_set(&p, &a, &speeds, &small_grid(), DEFAULT_MARGIN).unwrap();
    for region in &set.per_speed {
        let v = region.v0.unwrap();
        let mut seen = [0usize; 3];
        for (k, class) in region.iter_cells() {
            let direct = is_hurwitz(&char_poly(&k, &p, &a, v).unwrap().poly, DEFAULT_MARGIN).unwrap();
            match class {
                CellClass::Stable => {
                    assert!(direct, "{k:?} at {v}");
                    seen[0] += 1;
                }
                CellClass::Unstable => {
                    assert!(!direct, "{k:?} at {v}");
                    seen[1] += 1;
                }
                CellClass::Boundary => seen[2] += 1,
            }
            // Negative k_e violates the real-root boundary.
            if k.k_e < 0.0 {
                assert_eq!(class, CellClass::Unstable);
            }
        }
        assert!(seen.iter().all(|n| *n > 0), "{seen:?}");
    }
    // Intersection: stable only where every speed is stable.
    for (i, c) in set.intersection.cells.iter().enumerate() {
        let all = set.per_speed.iter().all(|r| r.cells[i] == CellClass::Stable);
        assert_eq!(*c == CellClass::Stable, all);
    }
}

#[test]
fn boundary_cells_lie_on_d_decomposition_curves() {
    // Every cell whose corners disagree must be crossed by k_e = 0 or by a
    // complex-root boundary curve at that k_ω.
    let p = sedan();
    let a = act();
    let v = 15.0;
    let grid = small_grid();
    let speeds = SpeedEnvelope::new(vec![v]).unwrap();
    let region = &stabilizing_set(&p, &a, &speeds, &grid, 0.0).unwrap().per_speed[0];
    let omegas = log_grid(1e-3, 1e3, 20_000);
    for (slice, &kw) in grid.k_omega.iter().enumerate() {
        let curve = d_decomposition_boundaries(&p, &a, v, kw, &omegas).unwrap().complex;
        for ie in 0..grid.k_e.cells {
            for it in 0..grid.k_theta.cells {
                if region.cell(slice, ie, it) != CellClass::Boundary {
                    continue;
                }
                let (e0, e1) = (grid.k_e.vertex(ie), grid.k_e.vertex(ie + 1));
                let (t0, t1) = (grid.k_theta.vertex(it), grid.k_theta.vertex(it + 1));
                let pad = 0.02 * (e1 - e0).max(t1 - t0);
                let real_root = e0 <= 0.0 && 0.0 <= e1;
                let complex_root = curve.iter().any(|b| {
                    b.k_e >= e0 - pad && b.k_e <= e1 + pad && b.k_theta >= t0 - pad && b.k_theta <= t1 + pad
                });
                assert!(real_root || complex_root, "cell ({ie}, {it}) at k_ω = {kw}");
            }
        }
    }
}

#[test]
fn actuator_step_overshoot_and_dc_gain() {
    let a = act();
    let dt = 1e-4;
    let mut s = ActuationState::default();
    let mut peak = 0.0f64;
    for _ in 0..(3.0 / dt) as usize {
        let x = rk4(&[s.delta_f, s.delta_f_dot], dt, |x| {
            let d = actuation_deriv(
                ActuationState {
                    delta_f: x[0],
                    delta_f_dot: x[1],
                },
                1.0,
                &a,
            );
            [d.delta_f, d.delta_f_dot]
        });
        s = ActuationState {
            delta_f: x[0],
            delta_f_dot: x[1],
        };
        peak = peak.max(s.delta_f);
    }
    let z = a.damping_ratio;
    let expected = (-std::f64::consts::PI * z / (1.0 - z * z).sqrt()).exp();
    assert_relative_eq!(expected, 0.2480, epsilon = 5e-4);
    assert!(((peak - 1.0) - expected).abs() <= 0.01 * expected, "{peak}");
    assert!((s.delta_f - 1.0).abs() <= 1e-9, "{}", s.delta_f);
}

/// `exp(A t)` applied to the affine system through an augmented matrix.
fn expm_oracle(p: &VehicleParams, a: &ActuationParams, v: f64, x0: [f64; 6], u: f64, inv_r: f64, t: f64) -> Vec<f64> {
    let (m, c, l) = mcl(p, v);
    let mi = m.try_inverse().unwrap();
    let (cf, wn, z) = (p.cornering_front, a.natural_frequency, a.damping_ratio);
    let dist = nalgebra::Vector2::new(
        p.mass * v * v + p.lf * cf - p.lr * p.cornering_rear,
        p.lf * p.lf * cf + p.lr * p.lr * p.cornering_rear,
    );
    let input = nalgebra::Vector2::new(1.0, p.lf) * cf;
    // State (e, θ, ė, θ̇, δ, δ̇) plus a constant 1.
    let mut big = DMatrix::<f64>::zeros(7, 7);
    big[(0, 2)] = 1.0;
    big[(1, 3)] = 1.0;
    let mil = -mi * l;
    let mic = -mi * c;
    let mib = mi * input;
    let mid = -(mi * dist) * inv_r;
    for i in 0..2 {
        for j in 0..2 {
            big[(2 + i, j)] = mil[(i, j)];
            big[(2 + i, 2 + j)] = mic[(i, j)];
        }
        big[(2 + i, 4)] = mib[i];
        big[(2 + i, 6)] = mid[i];
    }
    big[(4, 5)] = 1.0;
    big[(5, 4)] = -wn * wn;
    big[(5, 5)] = -2.0 * z * wn;
    big[(5, 6)] = wn * wn * u;
    let e = (big * t).exp();
    let x = nalgebra::DVector::from_vec(vec![x0[0], x0[2], x0[1], x0[3], x0[4], x0[5], 1.0]);
    let y = e * x;
    vec![y[0], y[2], y[1], y[3], y[4], y[5]]
}

#[test]
fn error_system_matches_matrix_exponential() {
    let p = sedan();
    let a = act();
    let v = 17.3;
    let x0 = [0.3, -0.1, 0.02, 0.05, 0.01, 0.0];
    let (u, inv_r) = (0.015, 1.0 / 200.0);
    let dt = 1e-3;
    let mut s = ErrorSystemState {
        lateral: LateralState {
            e_lat: x0[0],
            e_lat_dot: x0[1],
            theta_err: x0[2],
            theta_err_dot: x0[3],
        },
        actuation: ActuationState {
            delta_f: x0[4],
            delta_f_dot: x0[5],
        },
    };
    for _ in 0..2000 {
        s = integrate_error_step(&s, u, inv_r, dt, &p, &a, v).unwrap();
    }
    let got = [
        s.lateral.e_lat,
        s.lateral.e_lat_dot,
        s.lateral.theta_err,
        s.lateral.theta_err_dot,
        s.actuation.delta_f,
        s.actuation.delta_f_dot,
    ];
    let want = expm_oracle(&p, &a, v, x0, u, inv_r, 2.0);
    for (g, w) in got.iter().zip(&want) {
        assert!((g - w).abs() <= 1e-8 * w.abs().max(1.0), "{got:?}\n{want:?}");
    }
}
