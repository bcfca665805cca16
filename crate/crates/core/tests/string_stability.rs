mod common;

use common::chain_input;
use elc_core::controller::GainVector;
use elc_core::exec::Exec;
use elc_core::platoon::{default_vehicle, DEFAULT_GAINS};
use elc_core::string_stability::{
    certify_sweep, closed_loop_g, frequency_response, hinf_norms, propagate_chain, scale_matrix,
    sigma_max, sigma_min, CMatrix2, FrequencyGrid, NormOptions,
};
use elc_core::vehicle_model::VehicleParams;
use nalgebra::{DMatrix, Matrix2};
use num_complex::Complex64;
use proptest::prelude::*;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn svd_extremes(a: &CMatrix2) -> (f64, f64) {
    let d = DMatrix::from_iterator(2, 2, a.iter().copied());
    let sv = d.singular_values();
    (sv.max(), sv.min())
}

/// `(M₀ + BK)⁻¹ BK` from the bicycle matrices and an explicit 2×2 inverse.
fn g_oracle(omega: f64, k: &GainVector, p: &VehicleParams, v: f64) -> CMatrix2 {
    let (cf, cr, a, b) = (p.cornering_front, p.cornering_rear, p.lf, p.lr);
    let s = c(0.0, omega);
    let m = Matrix2::new(p.mass, 0.0, 0.0, p.yaw_inertia).map(Complex64::from);
    let damp = Matrix2::new(
        (cf + cr) / v,
        (a * cf - b * cr) / v,
        (a * cf - b * cr) / v,
        (a * a * cf + b * b * cr) / v,
    )
    .map(Complex64::from);
    let stiff = Matrix2::new(0.0, -(cf + cr), 0.0, -(a * cf - b * cr)).map(Complex64::from);
    let bk = CMatrix2::new(
        c(cf * k.k_e, 0.0),
        (s * k.k_omega + k.k_theta) * cf,
        c(a * cf * k.k_e, 0.0),
        (s * k.k_omega + k.k_theta) * (a * cf),
    );
    let t = m * (s * s) + damp * s + stiff + bk;
    let det = t[(0, 0)] * t[(1, 1)] - t[(0, 1)] * t[(1, 0)];
    let inv = CMatrix2::new(t[(1, 1)], -t[(0, 1)], -t[(1, 0)], t[(0, 0)]) / det;
    inv * bk
}

fn default_opts() -> NormOptions {
    NormOptions::default()
}

fn complex_entry() -> impl Strategy<Value = Complex64> {
    (-1e3..1e3f64, -1e3..1e3f64).prop_map(|(a, b)| c(a, b))
}

proptest! {
    #[test]
    fn closed_form_singular_values_match_svd(
        a in complex_entry(), b in complex_entry(), cc in complex_entry(), d in complex_entry()
    ) {
        let m = CMatrix2::new(a, b, cc, d);
        let (hi, lo) = svd_extremes(&m);
        prop_assert!((sigma_max(&m) - hi).abs() <= 1e-10 * hi.max(1e-300));
        prop_assert!((sigma_min(&m) - lo).abs() <= 1e-8 * hi.max(1e-300));
    }

    #[test]
    fn weighting_is_a_similarity(a in complex_entry(), b in complex_entry(), cc in complex_entry(), d in complex_entry(), ell in 0.1..50.0f64) {
        let m = CMatrix2::new(a, b, cc, d);
        let s = scale_matrix(&m, ell);
        let dm = Matrix2::new(1.0, 0.0, 0.0, ell).map(Complex64::from);
        let di = Matrix2::new(1.0, 0.0, 0.0, 1.0 / ell).map(Complex64::from);
        let direct = dm * m * di;
        prop_assert!((s - direct).norm() <= 1e-12 * direct.norm().max(1.0));
        let tr = |x: &CMatrix2| x[(0, 0)] + x[(1, 1)];
        prop_assert!((tr(&s) - tr(&m)).norm() <= 1e-9 * m.norm().max(1.0));
    }
}

#[test]
fn transfer_matrix_matches_oracle() {
    let p = default_vehicle();
    for v in [5.0, 10.0, 30.0] {
        for omega in [1e-3, 0.05, 0.7, 3.0, 40.0, 900.0] {
            let got = closed_loop_g(omega, &DEFAULT_GAINS, &p, v, 1.0).unwrap();
            assert!(!got.singular);
            let want = g_oracle(omega, &DEFAULT_GAINS, &p, v);
            assert!((got.g - want).norm() <= 1e-9 * want.norm().max(1e-12), "ω = {omega}");
            assert!((got.sigma_max - svd_extremes(&want).0).abs() <= 1e-9 * got.sigma_max);
            let gi = want - CMatrix2::identity();
            assert!((got.sigma_max_minus_i - svd_extremes(&gi).0).abs() <= 1e-9 * got.sigma_max_minus_i);
        }
    }
}

#[test]
fn rho_is_linear_in_alpha() {
    let p = default_vehicle();
    let alphas = [0.0, 0.1, 0.25, 0.5, 0.75, 1.0];
    let reports = certify_sweep(&DEFAULT_GAINS, &alphas, &p, 10.0, &default_opts(), Exec::default()).unwrap();
    let g = reports[0].g_norm;
    for r in &reports {
        assert_eq!(r.g_norm, g);
        assert!((r.rho - r.alpha * g).abs() <= 1e-15 * g.max(1.0));
        assert_eq!(r.bound_m.is_some(), r.rho < 1.0);
        if let Some(m) = r.bound_m {
            assert!((m - r.g_minus_i_norm / (1.0 - r.rho)).abs() <= 1e-12 * m);
            assert_eq!(r.bound_m_strict, Some(1.0 + m));
        }
    }
}

#[test]
fn refined_peak_dominates_dense_grid() {
    let p = default_vehicle();
    let opts = default_opts();
    let (g, gi) = hinf_norms(&DEFAULT_GAINS, &p, 10.0, &opts, Exec::default()).unwrap();
    let dense = NormOptions {
        grid: FrequencyGrid {
            min: 1e-3,
            max: 1e3,
            points: 40_000,
        },
        ..opts
    };
    let samples = frequency_response(&DEFAULT_GAINS, &p, 10.0, &dense, Exec::default()).unwrap();
    let max_g = samples.iter().map(|s| s.sigma_max).fold(0.0, f64::max);
    let max_gi = samples.iter().map(|s| s.sigma_max_minus_i).fold(0.0, f64::max);
    assert!(g.norm >= max_g * (1.0 - 1e-6), "{} vs {max_g}", g.norm);
    assert!(gi.norm >= max_gi * (1.0 - 1e-6), "{} vs {max_gi}", gi.norm);
    assert!(g.norm <= max_g * (1.0 + 1e-3));
}

#[test]
fn sequential_and_parallel_agree_bitwise() {
    let p = default_vehicle();
    let opts = default_opts();
    let a = frequency_response(&DEFAULT_GAINS, &p, 17.0, &opts, Exec::Sequential).unwrap();
    let b = frequency_response(&DEFAULT_GAINS, &p, 17.0, &opts, Exec::Parallel).unwrap();
    assert_eq!(a, b);
    let ra = certify_sweep(&DEFAULT_GAINS, &[0.3, 0.9], &p, 17.0, &opts, Exec::Sequential).unwrap();
    let rb = certify_sweep(&DEFAULT_GAINS, &[0.3, 0.9], &p, 17.0, &opts, Exec::Parallel).unwrap();
    assert_eq!(ra, rb);
}

#[test]
fn chain_recursion_matches_closed_form() {
    let p = default_vehicle();
    let omegas = FrequencyGrid::default().omegas();
    assert_eq!(omegas.len(), 4000);
    let x1 = chain_input(&omegas);
    for alpha in [0.0, 0.5, 1.0] {
        let chain = propagate_chain(&x1, &omegas, 5, alpha, &DEFAULT_GAINS, &p, 10.0).unwrap();
        assert_eq!(chain.recursion.len(), 5);
        let gap = chain.spectral_relative_gap();
        assert!(gap <= 1e-10, "α = {alpha}: {gap}");
        assert!(chain.max_relative_gap() >= gap * 0.999);
    }
    // Pointwise as well at α = 0.5.
    let chain = propagate_chain(&x1, &omegas, 5, 0.5, &DEFAULT_GAINS, &p, 10.0).unwrap();
    assert!(chain.max_relative_gap() <= 1e-10, "{}", chain.max_relative_gap());
}
