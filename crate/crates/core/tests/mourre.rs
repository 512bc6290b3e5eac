//! Escape-function operator, positive commutator, well-prepared data and the
//! growth audit.

use fracnls_core::dynamics::{effective_generator, effective_generator_banded, EffectiveStepper};
use fracnls_core::fourier::{gauge, FourierField, ZERO};
use fracnls_core::linalg;
use fracnls_core::mourre::*;
use fracnls_core::paradiff::{self, quantize_separable_banded};
use fracnls_core::symbol::{self, eta};
use fracnls_core::Error;
use num_complex::Complex64;
use proptest::prelude::*;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn desk() -> (WellPreparedData, MourreSetup) {
    build_wellprepared(0.5, 0.05, 0.5, 7.0, 0.6, 0.6, 1e-10, 256).unwrap()
}

#[test]
fn radius_and_minimal_k() {
    let r = mourre_radius(0.5, 0.05, 0.5);
    assert!((r - 0.5f64.powf(-6.1)).abs() < 1e-12);
    assert!((r - 68.5935).abs() < 1e-4);
    assert_eq!(r.ceil() as usize, 69);
    assert_eq!(min_k_max(r), 3 * 69 + 10);
    match build_setup(0.5, 0.05, 0.5, 7.0, c(0.3, 0.0), c(0.3, 0.0), 200) {
        Err(Error::Config(msg)) => assert!(msg.contains("K ≥ 217"), "{msg}"),
        other => panic!("expected a configuration error, got {other:?}"),
    }
}

#[test]
fn operator_structure() {
    let s = build_setup(0.5, 0.05, 0.5, 3.0, c(0.3, 0.1), c(0.2, -0.2), 220).unwrap();
    assert!(s.a_self_adjoint_defect() <= 1e-12);
    assert!(s.commutator_hermitian_defect() <= 1e-12);
    let km = s.k_max as i64;
    for k in -km..=km {
        for j in -km..=km {
            if (k + j).abs() as f64 <= 2.0 * s.r {
                assert_eq!(s.a_op.entry(k, j), ZERO, "({k}, {j})");
            }
        }
    }
    let zero = build_setup(0.5, 0.05, 0.5, 3.0, ZERO, c(0.3, 0.0), 220).unwrap();
    assert_eq!(linalg::max_abs(&zero.a_op.matrix), 0.0);
}

#[test]
fn banded_quantization_matches_dense() {
    let k = 48;
    let (nx, xm) = paradiff::lattice_for(k);
    let (z1, zm1) = (c(0.3, 0.1), c(0.2, -0.2));
    let dense = paradiff::quantize_bw(&symbol::sym_fa(2.0, 6.0, z1, zm1, nx, xm), k).unwrap().matrix;
    let band = quantize_separable_banded(&symbol::t_coeffs(z1, zm1), |xi| psi1_sq(xi, 2.0, 6.0), k).to_dense();
    assert!(linalg::max_abs_diff(&dense, &band) <= 1e-13 * linalg::max_abs(&dense));
    let g = effective_generator(z1, zm1, 0.5, k).unwrap();
    let gb = effective_generator_banded(z1, zm1, 0.5, k).to_dense();
    assert!(linalg::max_abs_diff(&g, &gb) <= 1e-14 * linalg::max_abs(&g));
}

#[test]
fn banded_stepper_matches_dense_exponential() {
    let k = 64;
    let (z1, zm1) = (c(0.3, 0.0), c(0.3, 0.0));
    let mut zeta = FourierField::random(k, 2, 1.0, 0.0, 1.0);
    zeta.set(1, ZERO);
    zeta.set(-1, ZERO);
    let dense = EffectiveStepper::new(z1, zm1, 0.5, k, 1e-2).unwrap();
    let band = EffectiveStepper::banded(z1, zm1, 0.5, k, 1e-2).unwrap();
    let (mut a, mut b) = (zeta.clone(), zeta);
    for _ in 0..100 {
        a = dense.step(&a);
        b = band.step(&b);
    }
    assert!(a.max_abs_diff(&b) < 1e-12, "{}", a.max_abs_diff(&b));
}

#[test]
fn a_functional_closed_form_and_invariances() {
    let (data, setup) = desk();
    assert_eq!(setup.n, 69);
    let expected = a_closed_form(0.5, 0.6, 0.6, 7.0, 69, 1e-10);
    // ε²ρ1ρ₋1 (3N+1)^{2s} ρ² with 3N+1 = 208.
    let oracle = 0.25 * 0.36 * 208f64.powi(14) * 1e-20;
    assert!((expected - oracle).abs() <= 1e-14 * oracle);
    assert!((data.a0 - expected).abs() <= 1e-12 * expected, "{} {}", data.a0, expected);
    let zeta = data.normal_part();
    let band = a_band(&setup, 256);
    assert!((a_functional_banded(&band, &zeta) - data.a0).abs() <= 1e-12 * data.a0);
    for lam in [0.5, 3.0] {
        let v = a_functional(&setup, &zeta.scale(lam));
        assert!((v - lam * lam * data.a0).abs() <= 1e-12 * v);
    }
    let v = a_functional(&setup, &gauge(&zeta, 1.1));
    assert!((v - data.a0).abs() <= 1e-12 * data.a0);
    let low = FourierField::from_modes(256, &[(60, c(1.0, 0.0)), (62, c(0.0, 1.0)), (-3, c(2.0, 0.0))]);
    assert_eq!(a_functional(&setup, &low), 0.0);
}

#[test]
fn wellprepared_builder() {
    assert!((nu0(0.6, 0.6) - 0.36).abs() < 1e-15);
    let (data, _) = desk();
    assert_eq!(data.nu0, nu0(0.6, 0.6));
    let nonzero: Vec<i64> = data.field.modes().filter(|(_, v)| *v != ZERO).map(|(k, _)| k).collect();
    assert_eq!(nonzero, vec![-1, 1, 207, 209]);
    assert!(data.a0 > data.b2_threshold);
    // (A1) holds because ρ ≤ ε³/√2.
    let split = fracnls_core::fourier::split_modes(&data.field);
    assert!(split.tangential.sobolev_norm(0.0) <= 0.5);
    assert!(split.normal.sobolev_norm(0.0) <= 0.125);

    assert!(matches!(build_wellprepared(0.5, 0.05, 0.5, 7.0, 1.0, 0.0, 1e-10, 256), Err(Error::Config(_))));
    assert!(matches!(build_wellprepared(0.5, 0.05, 0.5, 7.0, 0.8, 0.8, 1e-10, 256), Err(Error::Config(_))));
    let rho_min = min_rho_b2(0.5, 0.05, 0.6, 0.6, 7.0, 69);
    match build_wellprepared(0.5, 0.05, 0.5, 7.0, 0.6, 0.6, 0.9 * rho_min, 256) {
        Err(Error::Config(msg)) => assert!(msg.contains("(B2)") && msg.contains(&format!("{rho_min:.6e}")), "{msg}"),
        other => panic!("expected a (B2) failure, got {other:?}"),
    }
    assert!(build_wellprepared(0.5, 0.05, 0.5, 7.0, 0.6, 0.6, 1.1 * rho_min, 256).is_ok());
}

/// `{𝔞, (J1 + 𝔳)ξ}` from independently coded symbols, with `x`-derivatives
/// by central differences.
fn bracket_oracle(z1: Complex64, zm1: Complex64, s: f64, r: f64, x: f64, xi: f64) -> f64 {
    let w = z1 * zm1.conj();
    let t = |x: f64| -(w * Complex64::from_polar(1.0, 2.0 * x)).im;
    let v = |x: f64| 2.0 * (w * Complex64::from_polar(1.0, 2.0 * x)).re;
    let j1 = 0.5 * (z1.norm_sqr() + zm1.norm_sqr());
    let h = 1e-5;
    let t_x = (t(x + h) - t(x - h)) / (2.0 * h);
    let v_x = (v(x + h) - v(x - h)) / (2.0 * h);
    let eta_r = |xi: f64| eta(xi / r);
    let eta_r_xi = (eta_r(xi + h) - eta_r(xi - h)) / (2.0 * h);
    let e = eta_r(xi);
    let d_xi_a = t(x) * (2.0 * s * xi.powf(2.0 * s - 1.0) * e * e + xi.powf(2.0 * s) * 2.0 * e * eta_r_xi);
    let d_x_a = t_x * xi.powf(2.0 * s) * e * e;
    d_xi_a * v_x * xi - d_x_a * (j1 + v(x))
}

#[test]
fn bracket_decomposition_matches_oracle() {
    let (z1, zm1, s, r) = (c(0.3, 0.1), c(0.25, -0.05), 2.0, 3.0);
    let nx = 16;
    let (a1, a2) = bracket_coefficients(z1, zm1, s, nx);
    let (_, i1) = symbol::constants_j1_i1(z1, zm1);
    for m in 0..nx {
        let x = 2.0 * std::f64::consts::PI * m as f64 / nx as f64;
        for xi in [3.2, 4.1, 5.0, 5.9, 7.5] {
            let lhs = bracket_oracle(z1, zm1, s, r, x, xi);
            let rhs = (i1 + a1[m]) * psi1_sq(xi, s, r) + a2[m] * psi2_sq(xi, s, r);
            assert!((lhs - rhs).abs() <= 1e-7 * (1.0 + lhs.abs()), "x = {x}, ξ = {xi}: {lhs} vs {rhs}");
        }
    }
}

#[test]
fn symbol_positivity_desk() {
    let (_, setup) = desk();
    let p = symbol_positivity(setup.z1, setup.zm1, 7.0, 256);
    assert!(p.min_a1 >= -1e-13 && p.min_a2 >= -1e-13, "{p:?}");
    assert!((p.i1 - 0.0162).abs() < 1e-15);
}

#[test]
fn commutator_and_upper_bound_reports() {
    let zero = build_setup(0.5, 0.05, 0.5, 7.0, ZERO, ZERO, 220).unwrap();
    let r = check_positive_commutator(&zero).unwrap();
    assert_eq!(r.min_gap, 0.0);
    assert_eq!(check_upper_bound(&zero).unwrap().min_gap, 0.0);

    let (_, setup) = desk();
    let r = check_positive_commutator(&setup).unwrap();
    assert!(r.c_epsilon <= 100.0, "{r:?}");
    assert!(r.commutator_hermitian_defect <= 1e-12);
    let u = check_upper_bound(&setup).unwrap();
    assert!(u.c_measured.is_finite() && u.symbol_min >= 0.0, "{u:?}");
}

#[test]
fn growth_control_and_validation() {
    // ν0 < 0 when z₋1 = 0: no growth rate to test against.
    let s = build_setup(0.5, 0.05, 0.5, 7.0, c(0.3, 0.0), ZERO, 220).unwrap();
    let zeta = FourierField::from_modes(220, &[(207, c(1e-10, 0.0)), (209, c(0.0, 1e-10))]);
    assert!(matches!(growth_experiment(&s, &zeta, 1e-2, 1.0, 220, 10), Err(Error::Config(_))));
    let (data, setup) = desk();
    let too_long = 1.01 * growth_horizon(0.5, data.nu0);
    assert!(matches!(growth_experiment(&setup, &data.normal_part(), 1e-3, too_long, 256, 10), Err(Error::Config(_))));
    let zero = FourierField::zeros(256);
    let g = growth_experiment(&setup, &zero, 1e-2, 0.5, 256, 10).unwrap();
    assert_eq!((g.rate_fit, g.growth_factor), (0.0, 1.0));
    assert!((growth_horizon(0.5, 0.36) - 4.0 / 0.36 * 2f64.ln()).abs() < 1e-12);
}

#[test]
fn short_growth_run_follows_lower_bound() {
    // Before the packet reaches the edge of the basis, 𝒜 grows faster than
    // ε²ν0 and the discrete inequality holds without slack.
    let (data, setup) = desk();
    let g = growth_experiment(&setup, &data.normal_part(), 1e-3, 0.5, 256, 50).unwrap();
    assert!(g.rate_fit >= g.lower_rate, "{g:?}");
    assert_eq!(g.gronwall_fraction, 1.0);
    let mut buf = Vec::new();
    g.write_csv(&mut buf).unwrap();
    assert!(String::from_utf8(buf).unwrap().starts_with("t,A,Hs_norm,lower_envelope\n"));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn bracket_coefficients_are_nonnegative(
        a in -1.0f64..1.0, b in -1.0f64..1.0, cc in -1.0f64..1.0, d in -1.0f64..1.0, s in 1.5f64..10.0
    ) {
        let (z1, zm1) = (c(a, b), c(cc, d));
        let scale = (z1.norm_sqr() + zm1.norm_sqr()).powi(2).max(1e-300);
        let (a1, a2) = bracket_coefficients(z1, zm1, s, 64);
        for (x, y) in a1.iter().zip(&a2) {
            prop_assert!(*x >= -1e-14 * scale && *y >= -1e-14 * scale);
        }
    }

    #[test]
    fn a_functional_is_gauge_invariant(seed in 0u64..500, theta in 0.0f64..6.3) {
        let s = build_setup(0.5, 0.05, 0.5, 2.0, c(0.3, 0.1), c(0.2, 0.0), 217).unwrap();
        let band = a_band(&s, 217);
        let mut zeta = FourierField::random(217, seed, 0.0, 0.0, 1.0);
        zeta.set(1, ZERO);
        zeta.set(-1, ZERO);
        let v = a_functional_banded(&band, &zeta);
        let w = a_functional_banded(&band, &gauge(&zeta, theta));
        prop_assert!((v - w).abs() <= 1e-12 * v.abs().max(1.0));
    }
}
