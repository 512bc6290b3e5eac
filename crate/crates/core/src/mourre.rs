//! The escape-function operator `𝔄 = Op(𝔱(x)|ξ|^{2s}η_R(ξ)²)`, its positive
//! commutator with the transport `Op((J1 + 𝔳(x))ξ)`, the `𝒜`-functional,
//! well-prepared data and the growth experiment on the effective equation.

use num_complex::Complex64;
use serde::Serialize;

use crate::dynamics::{EffectiveStepper, MonitorSpec, Monitors};
use crate::fourier::{split_modes, FourierField, I};
use crate::linalg::{self, CMat};
use crate::paradiff::{self, BandOperator, ParaOperator};
use crate::symbol::{self, eta, eta_prime};
use crate::Error;

/// Extra room above the highest data mode `3N + 2`.
pub const K_MARGIN: usize = 8;

/// Fraction of steps on which the discrete growth inequality must hold.
pub const GRONWALL_FRACTION: f64 = 0.95;

/// `R = ε^{-(3+θ)/(1-α)}`.
pub fn mourre_radius(epsilon: f64, theta: f64, alpha: f64) -> f64 {
    epsilon.powf(-(3.0 + theta) / (1.0 - alpha))
}

/// Smallest admissible `K` for radius `R`: room for the modes `3N, 3N+2` and
/// the cutoff band.
pub fn min_k_max(r: f64) -> usize {
    3 * r.ceil() as usize + 2 + K_MARGIN
}

/// `ν0 = 2ρ1ρ₋1 - (ρ1² + ρ₋1²)/2`.
pub fn nu0(rho1: f64, rhom1: f64) -> f64 {
    2.0 * rho1 * rhom1 - 0.5 * (rho1 * rho1 + rhom1 * rhom1)
}

#[derive(Clone, Debug)]
pub struct MourreSetup {
    pub epsilon: f64,
    pub theta: f64,
    pub alpha: f64,
    pub s: f64,
    pub r: f64,
    pub n: usize,
    pub k_max: usize,
    pub z1: Complex64,
    pub zm1: Complex64,
    pub a_op: ParaOperator,
    pub b_op: ParaOperator,
    pub c_op: ParaOperator,
    pub j1: f64,
    pub i1: f64,
    /// `(2|z1||z₋1| - J1)/ε²`.
    pub nu0: f64,
    /// `i[A, B]` formed on the extended basis and restricted to `K`.
    pub commutator: CMat,
}

/// Operators `A`, `B`, `C` on radius `k` from a shared symbol lattice.
fn quantize_triple(
    s: f64,
    r: f64,
    z1: Complex64,
    zm1: Complex64,
    k: usize,
    lattice: (usize, usize),
) -> Result<[ParaOperator; 3], Error> {
    let (nx, xm) = lattice;
    Ok([
        paradiff::quantize_bw(&symbol::sym_fa(s, r, z1, zm1, nx, xm), k)?,
        paradiff::quantize_bw(&symbol::sym_transport(z1, zm1, nx, xm), k)?,
        paradiff::quantize_bw(&symbol::sym_c(s, r, nx, xm), k)?,
    ])
}

pub fn build_setup(
    epsilon: f64,
    theta: f64,
    alpha: f64,
    s: f64,
    z1: Complex64,
    zm1: Complex64,
    k_max: usize,
) -> Result<MourreSetup, Error> {
    if !(epsilon > 0.0 && epsilon < 1.0) || !(alpha > 0.0 && alpha < 1.0) || !(s > 1.0) {
        return Err(Error::Invalid(format!("need ε, α ∈ (0,1) and s > 1, got ε = {epsilon}, α = {alpha}, s = {s}")));
    }
    let r = mourre_radius(epsilon, theta, alpha);
    let k_min = min_k_max(r);
    if k_max < k_min {
        return Err(Error::Config(format!("K = {k_max} is too small for R = {r:.4}; need K ≥ {k_min}")));
    }
    let lattice = paradiff::lattice_for(k_max);
    let [a_op, b_op, c_op] = quantize_triple(s, r, z1, zm1, k_max, lattice)?;
    // The commutator is formed where the intermediate sums are complete.
    let ke = paradiff::extended_radius(k_max);
    let [ae, be, _] = quantize_triple(s, r, z1, zm1, ke, lattice)?;
    let comm = (ae.matrix.dot(&be.matrix) - be.matrix.dot(&ae.matrix)).mapv(|z| z * I);
    let commutator = linalg::restrict(&comm, ke, k_max);
    let (j1, i1) = symbol::constants_j1_i1(z1, zm1);
    let p = z1.norm() * zm1.norm();
    Ok(MourreSetup {
        epsilon,
        theta,
        alpha,
        s,
        r,
        n: r.ceil() as usize,
        k_max,
        z1,
        zm1,
        a_op,
        b_op,
        c_op,
        j1,
        i1,
        nu0: (2.0 * p - j1) / (epsilon * epsilon),
        commutator,
    })
}

impl MourreSetup {
    /// `max |A - A*| / max |A|`.
    pub fn a_self_adjoint_defect(&self) -> f64 {
        relative_hermitian_defect(&self.a_op.matrix)
    }

    /// `max |M - M*| / max |M|` for `M = i[A, B]`.
    pub fn commutator_hermitian_defect(&self) -> f64 {
        relative_hermitian_defect(&self.commutator)
    }

    fn weighted_min_eigenvalue(&self, m: &CMat) -> Result<f64, Error> {
        let w = linalg::sobolev_weights(self.k_max, -self.s);
        linalg::min_eigenvalue(&linalg::scale_rows_cols(&linalg::hermitian_part(m), &w, &w))
    }
}

fn relative_hermitian_defect(a: &CMat) -> f64 {
    let scale = linalg::max_abs(a);
    if scale == 0.0 {
        0.0
    } else {
        linalg::max_abs_diff(a, &linalg::adjoint(a)) / scale
    }
}

// ---------------------------------------------------------------------------
// Positive commutator and upper bound.

#[derive(Clone, Debug, Serialize)]
pub struct PositiveCommutatorReport {
    /// Smallest eigenvalue of `⟨D⟩^{-s} sym(i[A,B] - I1 C) ⟨D⟩^{-s}`.
    pub min_gap: f64,
    /// `(|z1|⁴ + |z₋1|⁴)/R`.
    pub scale: f64,
    /// Smallest `C` with `min_gap ≥ -C (|z1|⁴ + |z₋1|⁴)/R`.
    pub c_measured: f64,
    /// Same constant against `ε⁴/R`.
    pub c_epsilon: f64,
    pub commutator_hermitian_defect: f64,
}

pub fn check_positive_commutator(setup: &MourreSetup) -> Result<PositiveCommutatorReport, Error> {
    let m = &setup.commutator - &setup.c_op.matrix.mapv(|z| z * setup.i1);
    let min_gap = setup.weighted_min_eigenvalue(&m)?;
    let scale = (setup.z1.norm().powi(4) + setup.zm1.norm().powi(4)) / setup.r;
    let eps_scale = setup.epsilon.powi(4) / setup.r;
    let c = |sc: f64| if sc > 0.0 { (-min_gap / sc).max(0.0) } else { 0.0 };
    Ok(PositiveCommutatorReport {
        min_gap,
        scale,
        c_measured: c(scale),
        c_epsilon: c(eps_scale),
        commutator_hermitian_defect: setup.commutator_hermitian_defect(),
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct UpperBoundReport {
    /// Smallest eigenvalue of `⟨D⟩^{-s}(2|z1||z₋1| C - A)⟨D⟩^{-s}`.
    pub min_gap: f64,
    /// `(|z1|² + |z₋1|²)/R²`.
    pub scale: f64,
    pub c_measured: f64,
    /// `min_x (2|z1||z₋1| - 𝔱(x))`.
    pub symbol_min: f64,
}

pub fn check_upper_bound(setup: &MourreSetup) -> Result<UpperBoundReport, Error> {
    let p = setup.z1.norm() * setup.zm1.norm();
    let m = setup.c_op.matrix.mapv(|z| z * (2.0 * p)) - &setup.a_op.matrix;
    let min_gap = setup.weighted_min_eigenvalue(&m)?;
    let scale = (setup.z1.norm_sqr() + setup.zm1.norm_sqr()) / (setup.r * setup.r);
    let c_measured = if scale > 0.0 { (-min_gap / scale).max(0.0) } else { 0.0 };
    let nx = paradiff::lattice_for(setup.k_max).0;
    let t = symbol::t_coeffs(setup.z1, setup.zm1).to_grid(nx);
    let symbol_min = t.iter().map(|v| 2.0 * p - v.re).fold(f64::INFINITY, f64::min);
    Ok(UpperBoundReport { min_gap, scale, c_measured, symbol_min })
}

// ---------------------------------------------------------------------------
// Symbol-level identity.

/// `a1(x)`, `a2(x)` of the decomposition
/// `{𝔞, (J1+𝔳)ξ} = I1 ψ1² + a1 ψ1² + a2 ψ2²`, sampled at `x_m = 2πm/nx`.
pub fn bracket_coefficients(z1: Complex64, zm1: Complex64, s: f64, nx: usize) -> (Vec<f64>, Vec<f64>) {
    let (j1, i1) = symbol::constants_j1_i1(z1, zm1);
    let w0 = z1 * zm1.conj();
    let mut a1 = Vec::with_capacity(nx);
    let mut a2 = Vec::with_capacity(nx);
    for m in 0..nx {
        let x = 2.0 * std::f64::consts::PI * m as f64 / nx as f64;
        let w = w0 * Complex64::from_polar(1.0, 2.0 * x);
        let (t, v, t_x, v_x) = (-w.im, 2.0 * w.re, -2.0 * w.re, -4.0 * w.im);
        a1.push(t * v_x - v * t_x - j1 * t_x - i1 + (2.0 * s - 1.0) * t * v_x);
        a2.push(2.0 * t * v_x);
    }
    (a1, a2)
}

/// `ψ1(ξ)² = |ξ|^{2s} η_R²`.
pub fn psi1_sq(xi: f64, s: f64, r: f64) -> f64 {
    let e = eta(xi / r);
    xi.abs().powf(2.0 * s) * e * e
}

/// `ψ2(ξ)² = |ξ|^{2s} η_R (ξ/R) η'(ξ/R)`.
pub fn psi2_sq(xi: f64, s: f64, r: f64) -> f64 {
    let y = xi / r;
    xi.abs().powf(2.0 * s) * eta(y) * y * eta_prime(y)
}

#[derive(Clone, Debug, Serialize)]
pub struct SymbolPositivity {
    pub min_a1: f64,
    pub min_a2: f64,
    pub i1: f64,
}

pub fn symbol_positivity(z1: Complex64, zm1: Complex64, s: f64, nx: usize) -> SymbolPositivity {
    let (a1, a2) = bracket_coefficients(z1, zm1, s, nx);
    let min = |v: &[f64]| v.iter().cloned().fold(f64::INFINITY, f64::min);
    SymbolPositivity { min_a1: min(&a1), min_a2: min(&a2), i1: symbol::constants_j1_i1(z1, zm1).1 }
}

// ---------------------------------------------------------------------------
// The 𝒜-functional and well-prepared data.

/// `⟨A ζ, ζ⟩`.
pub fn a_functional(setup: &MourreSetup, zeta: &FourierField) -> f64 {
    let z = zeta.resized(setup.k_max);
    let q = paradiff::quadratic_form(&setup.a_op.matrix, z.coeffs());
    debug_assert!({
        let abs_form: f64 = setup
            .a_op
            .matrix
            .indexed_iter()
            .map(|((r, c), a)| a.norm() * z.coeffs()[r].norm() * z.coeffs()[c].norm())
            .sum();
        q.im.abs() <= 1e-12 * abs_form.max(f64::MIN_POSITIVE)
    });
    q.re
}

/// `ε²ρ1ρ₋1(3N+1)^{2s}ρ²`: the value of `𝒜` on the normal part of the
/// well-prepared datum.
pub fn a_closed_form(epsilon: f64, rho1: f64, rhom1: f64, s: f64, n: usize, rho: f64) -> f64 {
    epsilon * epsilon * rho1 * rhom1 * ((3 * n + 1) as f64).powf(2.0 * s) * rho * rho
}

/// Smallest `ρ` with `𝒜(z^⊥(0)) > ε^{3-3θ}`.
pub fn min_rho_b2(epsilon: f64, theta: f64, rho1: f64, rhom1: f64, s: f64, n: usize) -> f64 {
    (epsilon.powf(3.0 - 3.0 * theta) / a_closed_form(epsilon, rho1, rhom1, s, n, 1.0)).sqrt()
}

#[derive(Clone, Debug, Serialize)]
pub struct WellPreparedData {
    pub epsilon: f64,
    pub theta: f64,
    pub alpha: f64,
    pub s: f64,
    pub rho1: f64,
    pub rhom1: f64,
    pub rho: f64,
    pub r: f64,
    pub n: usize,
    pub nu0: f64,
    /// `𝒜(z^⊥(0))`.
    pub a0: f64,
    /// `ε^{3-3θ}`.
    pub b2_threshold: f64,
    #[serde(skip)]
    pub field: FourierField,
}

impl WellPreparedData {
    pub fn z1(&self) -> Complex64 {
        Complex64::new(self.epsilon * self.rho1, 0.0)
    }

    pub fn zm1(&self) -> Complex64 {
        Complex64::new(self.epsilon * self.rhom1, 0.0)
    }

    pub fn normal_part(&self) -> FourierField {
        split_modes(&self.field).normal
    }
}

/// `z(0) = ερ1 e^{ix} + ερ₋1 e^{-ix} + ρ e^{i3Nx} + iρ e^{i(3N+2)x}` with the
/// (B1) and (B2) checks; (B2) is evaluated through `A` itself.
#[allow(clippy::too_many_arguments)]
pub fn build_wellprepared(
    epsilon: f64,
    theta: f64,
    alpha: f64,
    s: f64,
    rho1: f64,
    rhom1: f64,
    rho: f64,
    k_max: usize,
) -> Result<(WellPreparedData, MourreSetup), Error> {
    if rho1 * rho1 + rhom1 * rhom1 > 1.0 {
        return Err(Error::Config(format!("ρ1² + ρ₋1² = {} exceeds 1", rho1 * rho1 + rhom1 * rhom1)));
    }
    let nu = nu0(rho1, rhom1);
    if nu <= 0.0 {
        return Err(Error::Config(format!("ν0 = 2ρ1ρ₋1 - (ρ1²+ρ₋1²)/2 = {nu:.6} is not positive")));
    }
    let z1 = Complex64::new(epsilon * rho1, 0.0);
    let zm1 = Complex64::new(epsilon * rhom1, 0.0);
    let setup = build_setup(epsilon, theta, alpha, s, z1, zm1, k_max)?;
    let n = setup.n as i64;
    let field =
        FourierField::from_modes(k_max, &[(1, z1), (-1, zm1), (3 * n, Complex64::new(rho, 0.0)), (3 * n + 2, I * rho)]);
    let a0 = a_functional(&setup, &split_modes(&field).normal);
    let b2_threshold = epsilon.powf(3.0 - 3.0 * theta);
    if !(a0 > b2_threshold) {
        let rho_min = min_rho_b2(epsilon, theta, rho1, rhom1, s, setup.n);
        return Err(Error::Config(format!(
            "(B2) fails: ⟨A z⊥(0), z⊥(0)⟩ = {a0:.6e} ≤ ε^(3-3θ) = {b2_threshold:.6e}; need ρ > {rho_min:.6e}"
        )));
    }
    let data = WellPreparedData {
        epsilon,
        theta,
        alpha,
        s,
        rho1,
        rhom1,
        rho,
        r: setup.r,
        n: setup.n,
        nu0: nu,
        a0,
        b2_threshold,
        field,
    };
    Ok((data, setup))
}

// ---------------------------------------------------------------------------
// Growth experiment.

/// `(T0/ε²) log(1/ε)` with `T0 = 1/ν0`.
pub fn growth_horizon(epsilon: f64, nu0: f64) -> f64 {
    (1.0 / nu0) / (epsilon * epsilon) * (1.0 / epsilon).ln()
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct GrowthSample {
    pub t: f64,
    pub a: f64,
    pub hs_norm: f64,
    /// `𝒜(0) e^{ν0 ε² t}`.
    pub lower_envelope: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct GrowthReport {
    pub k_max: usize,
    pub rate_fit: f64,
    pub lower_rate: f64,
    pub fit_start: f64,
    pub horizon: f64,
    pub growth_factor: f64,
    /// Fraction of steps with `Δ𝒜/Δt ≥ ε²ν0 𝒜` (no additive slack).
    pub gronwall_fraction: f64,
    /// Smallest `C ≥ 0` for which `Δ𝒜/Δt ≥ ε²ν0(𝒜 - C ε^{3-2θ})` holds on
    /// [`GRONWALL_FRACTION`] of the steps.
    pub c_meas: f64,
    /// `C_meas ε^{3-2θ} / 𝒜(0)`.
    pub c_meas_relative: f64,
    pub steps: usize,
    #[serde(skip)]
    pub series: Vec<GrowthSample>,
}

impl GrowthReport {
    pub fn write_csv(&self, mut w: impl std::io::Write) -> std::io::Result<()> {
        writeln!(w, "t,A,Hs_norm,lower_envelope")?;
        for g in &self.series {
            writeln!(w, "{:.16e},{:.16e},{:.16e},{:.16e}", g.t, g.a, g.hs_norm, g.lower_envelope)?;
        }
        Ok(())
    }
}

/// Least-squares slope of `log y` against `t`.
pub fn log_slope(t: &[f64], y: &[f64]) -> f64 {
    let n = t.len() as f64;
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let mt = t.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let num: f64 = t.iter().zip(&ly).map(|(a, b)| (a - mt) * (b - my)).sum();
    let den: f64 = t.iter().map(|a| (a - mt) * (a - mt)).sum();
    num / den
}

/// `A` in banded form on radius `k_max`, which may exceed the setup's `K`.
pub fn a_band(setup: &MourreSetup, k_max: usize) -> BandOperator {
    let (s, r) = (setup.s, setup.r);
    paradiff::quantize_separable_banded(&symbol::t_coeffs(setup.z1, setup.zm1), |xi| psi1_sq(xi, s, r), k_max)
}

/// `⟨A ζ, ζ⟩` for a banded `A`.
pub fn a_functional_banded(a: &BandOperator, zeta: &FourierField) -> f64 {
    a.apply(zeta).inner(zeta).re
}

/// Radius that keeps the transported packet inside the basis up to time
/// `horizon`: `(3N+2)·e^{4|z1||z₋1| T}` with a 25% margin, rounded up to a
/// multiple of 64.
pub fn growth_k_max(setup: &MourreSetup, horizon: f64) -> usize {
    let rate = 4.0 * setup.z1.norm() * setup.zm1.norm();
    let k = 1.25 * (3 * setup.n + 2) as f64 * (rate * horizon).exp();
    let k = (k / 64.0).ceil() as usize * 64;
    k.max(setup.k_max)
}

/// Propagates the normal part of `zeta0` under the effective equation on
/// radius `k_max` and audits the growth of `𝒜(t)`.
pub fn growth_experiment(
    setup: &MourreSetup,
    zeta0: &FourierField,
    dt: f64,
    horizon: f64,
    k_max: usize,
    stride: usize,
) -> Result<GrowthReport, Error> {
    let eps2 = setup.epsilon * setup.epsilon;
    if !(setup.nu0 > 0.0) {
        return Err(Error::Config(format!("growth needs ν0 > 0, got {:.6e}", setup.nu0)));
    }
    let t_max = growth_horizon(setup.epsilon, setup.nu0);
    if !(horizon > 0.0) || horizon > t_max * (1.0 + 1e-12) {
        return Err(Error::Config(format!("horizon {horizon} must lie in (0, (T0/ε²)log(1/ε)] = (0, {t_max:.6}]")));
    }
    if !(dt > 0.0) || stride == 0 {
        return Err(Error::Invalid("need dt > 0 and a positive stride".into()));
    }
    let steps = (horizon / dt - 1e-9).ceil() as usize;
    let h = horizon / steps as f64;
    if k_max < setup.k_max {
        return Err(Error::Config(format!("growth radius {k_max} is below the setup radius {}", setup.k_max)));
    }
    let stepper = EffectiveStepper::new(setup.z1, setup.zm1, setup.alpha, k_max, h)?;
    let a_op = a_band(setup, k_max);
    let spec = MonitorSpec { s0: crate::dynamics::DEFAULT_S0, s: setup.s };
    let mut zeta = split_modes(&zeta0.resized(k_max)).normal;
    let lower_rate = eps2 * setup.nu0;
    let mut a = a_functional_banded(&a_op, &zeta);
    let a0 = a;
    let mut times = vec![0.0];
    let mut values = vec![a];
    let mut series = vec![GrowthSample { t: 0.0, a, hs_norm: Monitors::of(&zeta, spec).hs, lower_envelope: a0 }];
    let mut slack = Vec::with_capacity(steps);
    for i in 0..steps {
        zeta = stepper.step(&zeta);
        let next = a_functional_banded(&a_op, &zeta);
        let t = (i + 1) as f64 * h;
        // C needed at this step: (𝒜 - Δ𝒜/(Δt ε²ν0)) / ε^{3-2θ}.
        slack.push(((a - (next - a) / (h * lower_rate)) / setup.epsilon.powf(3.0 - 2.0 * setup.theta)).max(0.0));
        a = next;
        times.push(t);
        values.push(a);
        if (i + 1) % stride == 0 || i + 1 == steps {
            series.push(GrowthSample {
                t,
                a,
                hs_norm: zeta.sobolev_norm(setup.s),
                lower_envelope: a0 * (lower_rate * t).exp(),
            });
        }
    }
    if values.iter().all(|v| *v == 0.0) {
        // 𝔄 = 0 when either tangential mode vanishes.
        return Ok(GrowthReport {
            k_max,
            rate_fit: 0.0,
            lower_rate,
            fit_start: 0.0,
            horizon,
            growth_factor: 1.0,
            gronwall_fraction: 1.0,
            c_meas: 0.0,
            c_meas_relative: 0.0,
            steps,
            series,
        });
    }
    if values.iter().any(|v| !(*v > 0.0)) {
        return Err(Error::Diverged { t: horizon, reason: "𝒜(t) left (0, ∞)".into() });
    }
    // Fit after 𝒜 has grown by one e-folding, or over the full window if it
    // never does.
    let start = values.iter().position(|v| *v >= a0 * std::f64::consts::E).unwrap_or(0);
    let start = if values.len() - start < 10 { 0 } else { start };
    let rate_fit = log_slope(&times[start..], &values[start..]);
    let gronwall_fraction = slack.iter().filter(|c| **c == 0.0).count() as f64 / steps.max(1) as f64;
    let mut sorted = slack.clone();
    sorted.sort_by(|x, y| x.partial_cmp(y).unwrap());
    let idx = ((GRONWALL_FRACTION * steps as f64).ceil() as usize).clamp(1, steps.max(1)) - 1;
    let c_meas = sorted.get(idx).cloned().unwrap_or(0.0);
    Ok(GrowthReport {
        k_max,
        rate_fit,
        lower_rate,
        fit_start: times[start],
        horizon,
        growth_factor: a / a0,
        gronwall_fraction,
        c_meas,
        c_meas_relative: c_meas * setup.epsilon.powf(3.0 - 2.0 * setup.theta) / a0,
        steps,
        series,
    })
}
