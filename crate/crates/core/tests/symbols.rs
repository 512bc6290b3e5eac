use fracnls_core::fourier::{abs_pow, FourierField};
use fracnls_core::symbol::*;
use num_complex::Complex64;
use proptest::prelude::*;
use std::f64::consts::PI;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn close(a: Complex64, b: Complex64, tol: f64) -> bool {
    (a - b).norm() <= tol
}

#[test]
fn eta_examples() {
    let r = 7.0;
    assert_eq!(eta_r(r, r), 0.0);
    assert!((eta_r(1.5 * r, r) - 0.5).abs() < 1e-15);
    assert_eq!(eta_r(2.0 * r, r), 1.0);
}

#[test]
fn eta_is_monotone_and_c1() {
    let mut prev = 0.0;
    let mut y = 0.5;
    while y < 2.5 {
        let v = eta(y);
        assert!(v >= prev - 1e-15);
        prev = v;
        y += 1e-3;
    }
    let h = 1e-4;
    for y0 in [1.0, 2.0] {
        let left = (eta(y0) - eta(y0 - h)) / h;
        let right = (eta(y0 + h) - eta(y0)) / h;
        assert!((left - right).abs() < 1e-6, "kink at {y0}");
    }
    // Analytic derivative against a centred difference inside the band.
    for y0 in [1.2, 1.5, 1.8] {
        let fd = (eta(y0 + 1e-6) - eta(y0 - 1e-6)) / 2e-6;
        assert!((fd - eta_prime(y0)).abs() < 1e-6);
    }
}

#[test]
fn chi_examples() {
    let cut = CutoffFamily::default();
    for xi in [-40.0, 0.0, 0.5, 3.0, 100.0] {
        assert_eq!(cut.chi(0.0, xi), 1.0);
        let v = cut.chi(0.075 * xi.abs().max(1.0), xi);
        assert!(v > 0.0 && v < 1.0);
    }
    for xp in [0.1, 0.5, 3.0] {
        assert_eq!(cut.chi(xp, 0.0), 0.0);
    }
    assert!(CutoffFamily::new(0.2).is_err());
    assert_eq!(cut.chi_p(&[0.0, -3.0], 10.0), cut.chi(3.0, 10.0));
}

proptest! {
    #[test]
    fn chi_support_and_plateau(xp in -50.0f64..50.0, xi in -200.0f64..200.0) {
        let cut = CutoffFamily::default();
        let w = 0.1 * xi.abs().max(1.0);
        let v = cut.chi(xp, xi);
        prop_assert!((0.0..=1.0).contains(&v));
        if xp.abs() <= w / 2.0 { prop_assert_eq!(v, 1.0); }
        if xp.abs() >= w { prop_assert_eq!(v, 0.0); }
        prop_assert_eq!(v, cut.chi(-xp, xi));
        prop_assert_eq!(v, cut.chi(xp, -xi));
    }
}

fn two_cos() -> FourierField {
    FourierField::from_modes(4, &[(1, c(1.0, 0.0)), (-1, c(1.0, 0.0))])
}

#[test]
fn underline_v_examples() {
    let v = underline_v_coeffs(&two_cos());
    assert_eq!(v.get(2), c(1.0, 0.0));
    assert_eq!(v.get(-2), c(1.0, 0.0));
    assert_eq!(v.get(0), c(0.0, 0.0));
    let single = FourierField::from_modes(4, &[(3, c(0.4, 0.2))]);
    assert!(underline_v_coeffs(&single).modes().all(|(_, z)| z == c(0.0, 0.0)));
    assert!(underline_d_coeffs(&single).modes().all(|(_, z)| z.norm() < 1e-16));
}

#[test]
fn underline_fields_match_pointwise_oracle() {
    let u = FourierField::random(6, 2, 1.0, 0.0, 1.0);
    let n = 32;
    let ux = u.to_grid(n);
    let dux = u.dx().to_grid(n);
    let m = fracnls_core::fourier::mass(&u);
    let p = fracnls_core::fourier::momentum(&u);
    let v = underline_v_coeffs(&u).to_grid(n);
    let d = underline_d_coeffs(&u).to_grid(n);
    let b = b_coeffs(&u).to_grid(n);
    for i in 0..n {
        assert!(close(v[i], c(ux[i].norm_sqr() - m, 0.0), 1e-13));
        // Zero-average form: the mean of Im(u_x ū) is Σ k|u_k|² = -P.
        assert!(close(d[i], c((dux[i] * ux[i].conj()).im + p, 0.0), 1e-13));
        assert!(close(b[i], ux[i] * dux[i], 1e-13));
    }
}

#[test]
fn b_example() {
    let u = FourierField::from_modes(2, &[(1, c(1.0, 0.0))]);
    let b = b_coeffs(&u);
    assert_eq!(b.get(2), c(0.0, 1.0));
    assert_eq!(b.modes().filter(|(_, z)| *z != c(0.0, 0.0)).count(), 1);
}

#[test]
fn res_v_examples() {
    let v = res_v_coeffs(&two_cos());
    assert_eq!(v.get(2), c(1.0, 0.0));
    assert_eq!(v.get(-2), c(1.0, 0.0));
    let pos = FourierField::from_modes(5, &[(1, c(1.0, 0.0)), (3, c(0.0, 2.0))]);
    assert!(res_v_coeffs(&pos).modes().all(|(_, z)| z == c(0.0, 0.0)));
    let z = FourierField::from_modes(2, &[(1, c(0.0, 1.0)), (-1, c(1.0, 0.0))]);
    let g = SymbolGrid::from_x_function(16, 2, 0.0, &res_v_coeffs(&z), |_| c(1.0, 0.0));
    for m in 0..16 {
        let x = g.x(m);
        assert!((g.at(0, m).re + 2.0 * (2.0 * x).sin()).abs() < 1e-14);
    }
}

#[test]
fn beta2_examples() {
    let single = FourierField::from_modes(3, &[(2, c(0.3, 0.1))]);
    assert!(beta2_coeffs(&single, 0.5).modes().all(|(_, z)| z == c(0.0, 0.0)));
    let u = FourierField::from_modes(3, &[(1, c(1.0, 0.0)), (2, c(1.0, 0.0))]);
    let b = beta2_coeffs(&u, 0.5);
    let expected = c(1.0, 0.0) / (c(0.0, 1.0) * (1.0 - 2f64.sqrt()));
    assert!(close(b.get(-1), expected, 1e-15));
    assert!(close(b.get(1), expected.conj(), 1e-15));
}

#[test]
fn real_symbols_are_real_with_zero_mean() {
    let u = FourierField::random(10, 7, 1.0, 0.0, 1.0);
    let (nx, xm) = resolution(10);
    for g in [sym_underline_v(&u, nx, xm), sym_underline_d(&u, nx, xm), sym_res_v(&u, nx, xm)] {
        assert_eq!(g.max_imag(), 0.0);
        assert!(g.max_row_mean() <= 1e-13 * g.max_abs());
    }
    let beta = sym_beta2(&u, 0.5, nx, xm);
    assert_eq!(beta.max_imag(), 0.0);
    // The imaginary part dropped by the constructor is at rounding level.
    let raw = SymbolGrid::from_x_function(nx, xm, 0.0, &beta2_coeffs(&u, 0.5), |_| c(1.0, 0.0));
    assert!(raw.max_imag() <= 1e-13 * raw.max_abs());
}

#[test]
fn fa_constants_example() {
    let (j1, i1) = constants_j1_i1(c(0.1, 0.0), c(0.1, 0.0));
    assert!((j1 - 0.01).abs() < 1e-16);
    assert!((i1 - 2e-4).abs() < 1e-18);
    let t = t_coeffs(c(0.1, 0.0), c(0.1, 0.0)).to_grid(16);
    let v = fv_coeffs(c(0.1, 0.0), c(0.1, 0.0)).to_grid(16);
    for (m, (tm, vm)) in t.iter().zip(&v).enumerate() {
        let x = 2.0 * PI * m as f64 / 16.0;
        assert!((tm.re + 0.01 * (2.0 * x).sin()).abs() < 1e-16 && tm.im.abs() < 1e-17);
        assert!((vm.re - 0.02 * (2.0 * x).cos()).abs() < 1e-16);
    }
    let (_, i1) = constants_j1_i1(c(0.0, 0.0), c(0.3, 0.0));
    assert_eq!(i1, 0.0);
    let fa = sym_fa(2.0, 3.0, c(0.0, 0.0), c(0.3, 0.0), 16, 10);
    assert_eq!(fa.max_abs(), 0.0);
}

#[test]
fn fa_vanishes_below_r() {
    let r = 4.5;
    let fa = sym_fa(2.0, r, c(0.3, 0.1), c(0.2, -0.4), 16, 12);
    for h in 0..fa.n_xi() {
        if fa.xi(h).abs() <= r {
            for m in 0..16 {
                assert_eq!(fa.at(h, m), c(0.0, 0.0));
            }
        }
    }
    assert!(fa.max_abs() > 0.0);
}

#[test]
fn g2_single_mode_has_one_x_frequency() {
    let u = FourierField::from_modes(4, &[(2, c(0.5, 0.0))]);
    let (nx, xm) = resolution(4);
    let g = sym_g2(&u, 0.5, 1.0, nx, xm).unwrap();
    let h = g.g2.row_of(12).unwrap();
    let hat = g.g2.spectral_row(h);
    let nonzero: Vec<usize> = (0..nx).filter(|&m| hat[m].norm() > 1e-14).collect();
    assert_eq!(nonzero, vec![4]);
    // g^{(1)} + g^{(2)} with 𝚛 = 0 at ρ = 1: -m/(4w)(1 + S/(2w)) u².
    let w = 6f64.sqrt();
    let s = 2.0 * 2f64.sqrt();
    let expected = -4.0 / (4.0 * w) * (1.0 + s / (2.0 * w)) * 0.25;
    assert!((hat[4].re - expected).abs() < 1e-14 && hat[4].im.abs() < 1e-14);
    assert_eq!(g.p, 2);
}

/// Independent pointwise evaluation of the iteration at `ρ < 2`, where the
/// ξ-derivative term drops out.
fn g2_oracle(u: &FourierField, alpha: f64, p: usize, x: f64, xi: f64) -> (Complex64, Complex64) {
    let w = abs_pow(xi, alpha);
    if w == 0.0 {
        return (c(0.0, 0.0), c(0.0, 0.0));
    }
    let mut g = c(0.0, 0.0);
    let mut r = c(0.0, 0.0);
    for (j1, a) in u.modes() {
        for (j2, b) in u.modes() {
            let m = (j1 + j2) as f64;
            let s = abs_pow(j1 as f64, alpha) + abs_pow(j2 as f64, alpha);
            let e = Complex64::from_polar(1.0, m * x) * a * b;
            let mut term = -m / (4.0 * w);
            let mut total = term;
            for _ in 1..p {
                term *= s / (2.0 * w);
                total += term;
            }
            g += e * total;
            r += e * c(0.0, -s * term);
        }
    }
    (g, r)
}

#[test]
fn g2_matches_pointwise_oracle() {
    let u = FourierField::random(5, 13, 1.0, 0.0, 0.3);
    let (nx, xm) = resolution(8);
    for (alpha, rho) in [(0.5, 1.0), (0.3, 1.5), (0.7, 0.4)] {
        let g = sym_g2(&u, alpha, rho, nx, xm).unwrap();
        let p = (rho / alpha).ceil() as usize;
        assert_eq!(g.p, p);
        for h in [0, 5, xm * 2, xm * 2 + 3, g.g2.n_xi() - 1] {
            for m in [0, 7, nx / 3] {
                let (go, ro) = g2_oracle(&u, alpha, p, g.g2.x(m), g.g2.xi(h));
                assert!(close(g.g2.at(h, m), go, 1e-13), "g2 at h={h}, m={m}");
                assert!(close(g.residual.at(h, m), ro, 1e-13), "residual at h={h}, m={m}");
            }
        }
    }
}

#[test]
fn g2_guard_at_zero_frequency_is_immaterial() {
    let u = FourierField::random(6, 4, 1.0, 0.0, 0.5);
    let (nx, xm) = resolution(6);
    let g = sym_g2(&u, 0.5, 1.0, nx, xm).unwrap();
    let h0 = g.g2.row_of(0).unwrap();
    let hat = g.g2.spectral_row(h0);
    let cut = CutoffFamily::default();
    // Every x-frequency carried by g₂ is cut off at ξ = 0.
    for (i, z) in hat.iter().enumerate() {
        let m = if i > nx / 2 { i as i64 - nx as i64 } else { i as i64 };
        assert_eq!(z.norm(), 0.0);
        if m != 0 {
            assert_eq!(cut.chi(m as f64, 0.0), 0.0);
        }
    }
    // b carries no zero x-frequency, so neither does g₂ at any ξ.
    for h in 0..g.g2.n_xi() {
        assert!(g.g2.spectral_row(h)[0].norm() < 1e-15);
    }
}

#[test]
fn g2_p_equals_one_declares_order() {
    let u = FourierField::from_modes(3, &[(1, c(0.2, 0.0)), (2, c(0.1, 0.0))]);
    let (nx, xm) = resolution(3);
    let g = sym_g2(&u, 0.5, 0.4, nx, xm).unwrap();
    assert_eq!(g.p, 1);
    assert!((g.residual.order + 0.5).abs() < 1e-15);
    assert!(g.residual.order <= -0.4);
    assert!(sym_g2(&u, 1.5, 1.0, nx, xm).is_err());
    assert!(sym_g2(&u, 0.5, 0.0, nx, xm).is_err());
}

#[test]
fn xi_derivatives_on_polynomials_are_exact() {
    let g = sym_multiplier(8, 6, 3.0, |xi| c(xi * xi * xi, 0.0));
    let d1 = g.dxi(1);
    let d2 = g.dxi(2);
    for h in 1..g.n_xi() - 1 {
        let xi = g.xi(h);
        // Centred difference of step ½ on ξ³: 3ξ² + ¼.
        assert!((d1.at(h, 0).re - (3.0 * xi * xi + 0.25)).abs() < 1e-11);
        assert!((d2.at(h, 0).re - 6.0 * xi).abs() < 1e-10);
    }
}

#[test]
fn spectral_x_derivative() {
    let f = FourierField::from_modes(3, &[(3, c(1.0, 0.0)), (-3, c(1.0, 0.0))]);
    let g = SymbolGrid::from_x_function(16, 2, 0.0, &f, |_| c(1.0, 0.0));
    let d = g.dx(1);
    for m in 0..16 {
        let x = g.x(m);
        assert!((d.at(0, m).re + 6.0 * (3.0 * x).sin()).abs() < 1e-13);
    }
}

#[test]
fn csv_dump_has_expected_shape() {
    let g = sym_multiplier(4, 1, 0.0, |xi| c(xi, 0.0));
    let mut buf = Vec::new();
    g.write_csv(&mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "x_index,xi_times_2,re,im");
    assert_eq!(lines.len(), 1 + 4 * 5);
    assert!(lines[1].starts_with("0,-2,"));
}
