//! Time integration of the original, renormalized and effective equations.
//!
//! The cubic nonlinearity is evaluated pseudospectrally on a physical grid of
//! at least `2(2K+1)` points, which makes the Galerkin projection of
//! `|u|² u_x` exact. Stepping is integrating-factor RK4: the dispersive part
//! (a diagonal multiplier, or a frozen dense generator for the effective
//! equation) is propagated exactly, the rest by the classical RK4 tableau.

use std::io::Write;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::fourier::{self, abs_pow, gauge, grid_size, split_modes, translate, FourierField, I, ZERO};
use crate::linalg::{self, CMat};
use crate::paradiff::{self, BandOperator};
use crate::symbol::{self, SymbolGrid};
use crate::Error;

/// Upper bound for `dt·K·‖u0‖²_{s0}`.
pub const CFL_LIMIT: f64 = 0.5;

/// Default low Sobolev index `s0`.
pub const DEFAULT_S0: f64 = 2.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RhsKind {
    Main,
    Renormalized,
}

/// Frequency of the plane wave `a e^{i(kx - ωt)}`, an exact solution of either
/// equation.
pub fn plane_wave_frequency(kind: RhsKind, k: i64, a: f64, alpha: f64) -> f64 {
    let transport = a * a * k as f64;
    let disp = abs_pow(k as f64, alpha);
    match kind {
        RhsKind::Main => disp - transport,
        RhsKind::Renormalized => disp + transport,
    }
}

/// The plane wave of mode `k` and real amplitude `a` at time `t`.
pub fn plane_wave(k_max: usize, kind: RhsKind, k: i64, a: f64, alpha: f64, t: f64) -> FourierField {
    let w = plane_wave_frequency(kind, k, a, alpha);
    FourierField::from_modes(k_max, &[(k, Complex64::from_polar(a, -w * t))])
}

/// Padded grid size for the cubic product on radius `K`.
pub fn dealias_grid(k_max: usize) -> usize {
    grid_size(2 * (2 * k_max + 1))
}

/// Galerkin projection of `|u|² u_x` onto `|k| ≤ K`.
pub fn cubic_term(u: &FourierField) -> FourierField {
    let n = dealias_grid(u.k_max());
    let g = u.to_grid(n);
    let gx = u.dx().to_grid(n);
    let prod: Vec<Complex64> = g.iter().zip(&gx).map(|(a, b)| a.norm_sqr() * b).collect();
    FourierField::from_grid(&prod, u.k_max())
}

/// `-i|D|^α u + |u|² u_x`.
pub fn rhs_main(u: &FourierField, alpha: f64) -> FourierField {
    let mut out = cubic_term(u);
    out.axpy(-I, &u.frac_d(alpha));
    out
}

/// `-i|D|^α v + |v|² v_x - M(v) v_x + i P(v) v`.
pub fn rhs_renormalized(v: &FourierField, alpha: f64) -> FourierField {
    let mut out = nonlinear_part(RhsKind::Renormalized, v);
    out.axpy(-I, &v.frac_d(alpha));
    out
}

fn nonlinear_part(kind: RhsKind, u: &FourierField) -> FourierField {
    let mut out = cubic_term(u);
    if kind == RhsKind::Renormalized {
        out.axpy(Complex64::new(-fourier::mass(u), 0.0), &u.dx());
        out.axpy(I * fourier::momentum(u), u);
    }
    out
}

/// Exact propagator of the linear part over half a step.
#[derive(Clone, Debug)]
pub enum HalfStep {
    Diagonal(Vec<Complex64>),
    Dense(CMat),
}

impl HalfStep {
    /// `e^{-i|D|^α dt/2}`.
    pub fn dispersion(k_max: usize, alpha: f64, dt: f64) -> Self {
        let km = k_max as i64;
        HalfStep::Diagonal(
            (-km..=km).map(|k| Complex64::from_polar(1.0, -abs_pow(k as f64, alpha) * 0.5 * dt)).collect(),
        )
    }

    pub fn apply(&self, u: &FourierField) -> FourierField {
        match self {
            HalfStep::Diagonal(d) => {
                let coeffs = u.coeffs().iter().zip(d).map(|(a, b)| a * b).collect();
                FourierField::from_vec(coeffs).expect("odd length")
            }
            HalfStep::Dense(m) => linalg::apply(m, u),
        }
    }
}

/// One integrating-factor RK4 step for `u' = L u + N(t, u)` with
/// `half = e^{L dt/2}`.
pub fn ifrk4_step(
    half: &HalfStep,
    u: &FourierField,
    t: f64,
    dt: f64,
    nonlin: &dyn Fn(f64, &FourierField) -> FourierField,
) -> FourierField {
    let h = Complex64::new(dt, 0.0);
    let a = nonlin(t, u).scale_c(h);
    let eu = half.apply(u);
    let mut u2 = u.clone();
    u2.axpy(Complex64::new(0.5, 0.0), &a);
    let u2 = half.apply(&u2);
    let b = nonlin(t + 0.5 * dt, &u2).scale_c(h);
    let mut u3 = eu.clone();
    u3.axpy(Complex64::new(0.5, 0.0), &b);
    let c = nonlin(t + 0.5 * dt, &u3).scale_c(h);
    let mut u4 = half.apply(&eu);
    u4 = u4.add_field(&half.apply(&c));
    let d = nonlin(t + dt, &u4).scale_c(h);
    // E²u + (E²a + 2E(b + c) + d)/6
    let mut mid = b.add_field(&c).scale(2.0);
    mid = mid.add_field(&half.apply(&a));
    let mut out = half.apply(&eu.add_field(&mid.scale(1.0 / 6.0)));
    out.axpy(Complex64::new(1.0 / 6.0, 0.0), &d);
    out
}

/// One step of `integrate` from `u` by `dt` (which may be negative).
pub fn step(kind: RhsKind, u: &FourierField, alpha: f64, dt: f64) -> FourierField {
    let half = HalfStep::dispersion(u.k_max(), alpha, dt);
    ifrk4_step(&half, u, 0.0, dt, &|_, w| nonlinear_part(kind, w))
}

/// Exact linear flow `e^{-it|D|^α} u`.
pub fn linear_flow(u: &FourierField, alpha: f64, t: f64) -> FourierField {
    HalfStep::dispersion(u.k_max(), alpha, 2.0 * t).apply(u)
}

// ---------------------------------------------------------------------------
// Trajectories and monitors.

/// Sobolev indexes used by the monitors.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MonitorSpec {
    pub s0: f64,
    pub s: f64,
}

impl Default for MonitorSpec {
    fn default() -> Self {
        Self { s0: DEFAULT_S0, s: 7.0 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Monitors {
    pub mass: f64,
    pub momentum: f64,
    pub hs0: f64,
    pub hs: f64,
    pub ztop_l2: f64,
    pub zperp_l2: f64,
    pub zperp_hs0: f64,
}

impl Monitors {
    pub fn of(u: &FourierField, spec: MonitorSpec) -> Self {
        let split = split_modes(u);
        Self {
            mass: fourier::mass(u),
            momentum: fourier::momentum(u),
            hs0: u.sobolev_norm(spec.s0),
            hs: u.sobolev_norm(spec.s),
            ztop_l2: split.tangential.sobolev_norm(0.0),
            zperp_l2: split.normal.sobolev_norm(0.0),
            zperp_hs0: split.normal.sobolev_norm(spec.s0),
        }
    }
}

/// Why a run stopped before its horizon.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Abort {
    pub t: f64,
    pub reason: String,
}

#[derive(Clone, Debug)]
pub struct Trajectory {
    pub spec: MonitorSpec,
    pub times: Vec<f64>,
    pub states: Vec<FourierField>,
    pub monitors: Vec<Monitors>,
    /// Optional `𝒜(t)` column, filled by the growth experiment.
    pub a_functional: Option<Vec<f64>>,
    pub abort: Option<Abort>,
}

impl Trajectory {
    pub fn new(spec: MonitorSpec) -> Self {
        Self { spec, times: Vec::new(), states: Vec::new(), monitors: Vec::new(), a_functional: None, abort: None }
    }

    pub fn push(&mut self, t: f64, u: FourierField) {
        self.monitors.push(Monitors::of(&u, self.spec));
        self.times.push(t);
        self.states.push(u);
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn last_state(&self) -> Option<&FourierField> {
        self.states.last()
    }

    /// CSV with one row per recorded state, 17 significant digits.
    pub fn write_csv(&self, mut w: impl Write) -> std::io::Result<()> {
        write!(w, "t,mass,momentum,Hs0,Hs,ztop_L2,zperp_L2,zperp_Hs0")?;
        if self.a_functional.is_some() {
            write!(w, ",A_functional")?;
        }
        writeln!(w)?;
        for (i, (t, m)) in self.times.iter().zip(&self.monitors).enumerate() {
            write!(
                w,
                "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
                t, m.mass, m.momentum, m.hs0, m.hs, m.ztop_l2, m.zperp_l2, m.zperp_hs0
            )?;
            if let Some(a) = &self.a_functional {
                write!(w, ",{:.16e}", a[i])?;
            }
            writeln!(w)?;
        }
        Ok(())
    }
}

/// Step size, horizon and recording stride.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunOptions {
    pub dt: f64,
    pub t_final: f64,
    /// Record every `stride`-th step; the final state is always recorded.
    pub stride: usize,
    pub spec: MonitorSpec,
}

impl RunOptions {
    pub fn new(dt: f64, t_final: f64) -> Self {
        Self { dt, t_final, stride: 1, spec: MonitorSpec::default() }
    }

    /// Number of steps; `dt` is shortened so that they tile `[0, T]` exactly.
    fn steps(&self) -> Result<(usize, f64), Error> {
        if !(self.dt > 0.0) || !(self.t_final >= 0.0) || !self.t_final.is_finite() {
            return Err(Error::Invalid(format!("need dt > 0 and T ≥ 0, got dt = {}, T = {}", self.dt, self.t_final)));
        }
        if self.stride == 0 {
            return Err(Error::Invalid("recording stride must be positive".into()));
        }
        let n = (self.t_final / self.dt - 1e-9).ceil().max(0.0) as usize;
        Ok(if n == 0 { (0, 0.0) } else { (n, self.t_final / n as f64) })
    }
}

fn finite(u: &FourierField) -> bool {
    u.coeffs().iter().all(|c| c.re.is_finite() && c.im.is_finite())
}

/// Generic stepping loop shared by the nonlinear and effective integrators.
fn run(
    u0: &FourierField,
    opts: &RunOptions,
    mut advance: impl FnMut(&FourierField, f64, f64) -> FourierField,
) -> Result<Trajectory, Error> {
    let (n, dt) = opts.steps()?;
    let mut traj = Trajectory::new(opts.spec);
    traj.push(0.0, u0.clone());
    let mut u = u0.clone();
    for i in 0..n {
        let t = i as f64 * dt;
        let next = advance(&u, t, dt);
        if !finite(&next) {
            let t_bad = (i + 1) as f64 * dt;
            if *traj.times.last().unwrap() != t {
                traj.push(t, u);
            }
            traj.abort = Some(Abort { t: t_bad, reason: "non-finite state".into() });
            return Ok(traj);
        }
        u = next;
        if (i + 1) % opts.stride == 0 || i + 1 == n {
            traj.push((i + 1) as f64 * dt, u.clone());
        }
    }
    Ok(traj)
}

/// Integrates the original or renormalized equation from `u0`.
pub fn integrate(kind: RhsKind, u0: &FourierField, alpha: f64, opts: &RunOptions) -> Result<Trajectory, Error> {
    let cfl = opts.dt * u0.k_max() as f64 * u0.sobolev_norm(opts.spec.s0).powi(2);
    if cfl > CFL_LIMIT {
        return Err(Error::Invalid(format!(
            "dt·K·‖u0‖²_s0 = {cfl:.3e} exceeds {CFL_LIMIT}; reduce dt or the data size"
        )));
    }
    let (_, dt) = opts.steps()?;
    let half = HalfStep::dispersion(u0.k_max(), alpha, dt);
    run(u0, opts, |u, t, h| ifrk4_step(&half, u, t, h, &|_, w| nonlinear_part(kind, w)))
}

/// `v(t, x) = e^{itP} u(t, x - M t)` applied state by state.
pub fn renormalize_transform(traj: &Trajectory) -> Trajectory {
    let mut out = Trajectory::new(traj.spec);
    for ((t, u), m) in traj.times.iter().zip(&traj.states).zip(&traj.monitors) {
        let v = gauge(&translate(u, -m.mass * t), t * m.momentum);
        out.push(*t, v);
    }
    out.abort = traj.abort.clone();
    out
}

// ---------------------------------------------------------------------------
// Effective equation.

/// Caller-supplied perturbation streams for the effective equation.
#[derive(Default)]
pub struct Perturbations<'a> {
    /// Real symbol `Ṽ(t; x)ξ + b̃(t; x, ξ)` on the lattice of [`effective_lattice`].
    pub symbol: Option<&'a dyn Fn(f64) -> SymbolGrid>,
    /// Forcing `Ỹ(t)`.
    pub forcing: Option<&'a dyn Fn(f64) -> FourierField>,
}

/// Symbol lattice used for the effective operators on radius `K`.
pub fn effective_lattice(k_max: usize) -> (usize, usize) {
    paradiff::lattice_for(k_max)
}

/// Zeroes rows and columns of the modes `±1`.
pub fn project_normal(a: &CMat, k_max: usize) -> CMat {
    let mut out = a.clone();
    let km = k_max as i64;
    for k in [-1i64, 1] {
        if k.abs() <= km {
            let i = (k + km) as usize;
            out.row_mut(i).fill(ZERO);
            out.column_mut(i).fill(ZERO);
        }
    }
    out
}

/// `Op((J1 + 𝔳(x))ξ)` on radius `K`, projected onto `Λᶜ`.
pub fn transport_operator(z1: Complex64, zm1: Complex64, k_max: usize) -> Result<CMat, Error> {
    let (nx, xi_max) = effective_lattice(k_max);
    let op = paradiff::quantize_bw(&symbol::sym_transport(z1, zm1, nx, xi_max), k_max)?;
    Ok(project_normal(&op.matrix, k_max))
}

/// Frozen generator `-i|D|^α + i Op((J1 + 𝔳)ξ)` on `Λᶜ`.
pub fn effective_generator(z1: Complex64, zm1: Complex64, alpha: f64, k_max: usize) -> Result<CMat, Error> {
    let b = transport_operator(z1, zm1, k_max)?;
    let km = k_max as i64;
    let mut g = b.mapv(|z| z * I);
    for k in -km..=km {
        if !fourier::in_lambda(k) {
            let i = (k + km) as usize;
            g[[i, i]] -= I * abs_pow(k as f64, alpha);
        }
    }
    Ok(g)
}

/// Largest `K` for which the effective propagator is a dense matrix
/// exponential; above it the banded generator is exponentiated by a Taylor
/// polynomial per step.
pub const DENSE_EFFECTIVE_LIMIT: usize = 512;

/// Banded form of [`effective_generator`].
pub fn effective_generator_banded(z1: Complex64, zm1: Complex64, alpha: f64, k_max: usize) -> BandOperator {
    let (j1, _) = symbol::constants_j1_i1(z1, zm1);
    let mut f = symbol::fv_coeffs(z1, zm1);
    f.add(0, Complex64::new(j1, 0.0));
    let transport = paradiff::quantize_separable_banded(&f, |xi| xi, k_max).scale(I);
    let disp = BandOperator::diagonal(k_max, |k| -I * abs_pow(k as f64, alpha));
    let mut g = transport.add(&disp);
    g.remove_modes(&[-1, 1]);
    g
}

enum Propagator {
    Dense {
        half: HalfStep,
        full: CMat,
    },
    /// `G dt` and the Taylor degree reaching machine precision.
    Banded {
        g_dt: BandOperator,
        degree: usize,
    },
}

/// Stepper for the effective equation with a frozen generator.
pub struct EffectiveStepper {
    pub k_max: usize,
    pub dt: f64,
    prop: Propagator,
}

impl EffectiveStepper {
    pub fn new(z1: Complex64, zm1: Complex64, alpha: f64, k_max: usize, dt: f64) -> Result<Self, Error> {
        if k_max > DENSE_EFFECTIVE_LIMIT {
            return Self::banded(z1, zm1, alpha, k_max, dt);
        }
        let g = effective_generator(z1, zm1, alpha, k_max)?;
        let half = linalg::expm(&g.mapv(|z| z * (0.5 * dt)))?;
        let full = half.dot(&half);
        let prop = Propagator::Dense { half: HalfStep::Dense(half), full };
        Ok(Self { k_max, dt, prop })
    }

    /// Banded generator with a Taylor polynomial of the degree that brings
    /// `‖G dt‖^p/p!` below `1e-18`.
    pub fn banded(z1: Complex64, zm1: Complex64, alpha: f64, k_max: usize, dt: f64) -> Result<Self, Error> {
        let g_dt = effective_generator_banded(z1, zm1, alpha, k_max).scale(Complex64::new(dt, 0.0));
        let norm = g_dt.row_norm();
        let (mut degree, mut term) = (0usize, 1.0f64);
        while term > 1e-18 && degree < 200 {
            degree += 1;
            term *= norm / degree as f64;
        }
        if degree >= 200 {
            return Err(Error::Invalid(format!("‖G dt‖ = {norm:.3e} is too large for the Taylor propagator")));
        }
        Ok(Self { k_max, dt, prop: Propagator::Banded { g_dt, degree } })
    }

    /// Unperturbed step: `ζ ↦ e^{G dt} ζ`.
    pub fn step(&self, zeta: &FourierField) -> FourierField {
        match &self.prop {
            Propagator::Dense { full, .. } => linalg::apply(full, zeta),
            Propagator::Banded { g_dt, degree } => {
                let mut sum = zeta.clone();
                let mut term = zeta.clone();
                for p in 1..=*degree {
                    term = g_dt.apply(&term).scale(1.0 / p as f64);
                    sum = sum.add_field(&term);
                }
                sum
            }
        }
    }

    /// Step with perturbations through the integrating-factor scheme.
    pub fn step_perturbed(&self, zeta: &FourierField, t: f64, pert: &Perturbations) -> Result<FourierField, Error> {
        if pert.symbol.is_none() && pert.forcing.is_none() {
            return Ok(self.step(zeta));
        }
        let Propagator::Dense { half, .. } = &self.prop else {
            return Err(Error::Invalid(format!("perturbation hooks need K ≤ {DENSE_EFFECTIVE_LIMIT}")));
        };
        let k = self.k_max;
        let nonlin = |tau: f64, w: &FourierField| -> FourierField {
            let mut out = FourierField::zeros(k);
            if let Some(sym) = pert.symbol {
                let op = paradiff::quantize_bw(&sym(tau), k).expect("perturbation symbol lattice");
                out = linalg::apply(&project_normal(&op.matrix, k), w).scale_c(I);
            }
            if let Some(f) = pert.forcing {
                out = out.add_field(&split_modes(&f(tau).resized(k)).normal);
            }
            out
        };
        Ok(ifrk4_step(half, zeta, t, self.dt, &nonlin))
    }
}

/// Integrates `∂_t ζ = -i|D|^α ζ + i Op((J1 + 𝔳)ξ) ζ` plus optional
/// perturbations, on the modes `Λᶜ`.
pub fn propagate_effective(
    zeta0: &FourierField,
    z1: Complex64,
    zm1: Complex64,
    alpha: f64,
    opts: &RunOptions,
    pert: Option<&Perturbations>,
) -> Result<Trajectory, Error> {
    if split_modes(zeta0).tangential.coeffs().iter().any(|c| *c != ZERO) {
        return Err(Error::Invalid("effective data must vanish on the modes ±1".into()));
    }
    let (_, dt) = opts.steps()?;
    let stepper = EffectiveStepper::new(z1, zm1, alpha, zeta0.k_max(), dt)?;
    let empty = Perturbations::default();
    let pert = pert.unwrap_or(&empty);
    let mut failure = None;
    let traj = run(zeta0, opts, |u, t, _| match stepper.step_perturbed(u, t, pert) {
        Ok(v) => v,
        Err(e) => {
            failure.get_or_insert(e);
            u.clone()
        }
    })?;
    match failure {
        Some(e) => Err(e),
        None => Ok(traj),
    }
}

// ---------------------------------------------------------------------------
// Long-time control and bootstrap diagnostics.

#[derive(Clone, Debug, Serialize)]
pub struct LongTimeReport {
    pub epsilon: f64,
    pub theta: f64,
    pub s: f64,
    /// `‖z^⊤(0)‖_{L²} ≤ ε`.
    pub a1_top: bool,
    /// `‖z^⊥(0)‖_{L²} ≤ ε³`.
    pub a1_perp: bool,
    /// `sup_t ‖z(t)‖_s ≤ ε^{-θ}`.
    pub a2: bool,
    pub sup_hs: f64,
    pub hs_threshold: f64,
    /// First recorded time with `‖z(t)‖_s > ε^{-θ}`.
    pub first_violation: Option<f64>,
}

impl LongTimeReport {
    pub fn a1(&self) -> bool {
        self.a1_top && self.a1_perp
    }
}

pub fn monitor_long_time_controlled(traj: &Trajectory, epsilon: f64, theta: f64) -> Result<LongTimeReport, Error> {
    let m0 = traj.monitors.first().ok_or_else(|| Error::Invalid("empty trajectory".into()))?;
    let threshold = epsilon.powf(-theta);
    let first_violation = traj.times.iter().zip(&traj.monitors).find(|(_, m)| m.hs > threshold).map(|(t, _)| *t);
    let sup_hs = traj.monitors.iter().map(|m| m.hs).fold(0.0, f64::max);
    Ok(LongTimeReport {
        epsilon,
        theta,
        s: traj.spec.s,
        a1_top: m0.ztop_l2 <= epsilon,
        a1_perp: m0.zperp_l2 <= epsilon.powi(3),
        a2: first_violation.is_none(),
        sup_hs,
        hs_threshold: threshold,
        first_violation,
    })
}

/// Supremum of a monitored quantity against its bound.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct BoundCheck {
    pub limit: f64,
    pub sup: f64,
    /// `limit - sup`; negative when violated.
    pub margin: f64,
    pub holds: bool,
}

impl BoundCheck {
    fn new(limit: f64, sup: f64) -> Self {
        Self { limit, sup, margin: limit - sup, holds: sup <= limit }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct BootstrapReport {
    pub horizon: f64,
    /// `‖z^⊤‖_{L²} ≤ 2ε`.
    pub top_l2: BoundCheck,
    /// `‖z^⊥‖_{L²} ≤ ε^{3-3θ/2}`.
    pub perp_l2: BoundCheck,
    /// `‖z‖_{s0} ≤ 3ε`.
    pub full_s0: BoundCheck,
    /// `‖z^⊥‖_{s0} ≤ ε²`.
    pub perp_s0: BoundCheck,
}

impl BootstrapReport {
    pub fn all_hold(&self) -> bool {
        self.top_l2.holds && self.perp_l2.holds && self.full_s0.holds && self.perp_s0.holds
    }
}

pub fn bootstrap_check(traj: &Trajectory, epsilon: f64, theta: f64) -> Result<BootstrapReport, Error> {
    if traj.is_empty() {
        return Err(Error::Invalid("empty trajectory".into()));
    }
    let sup = |f: fn(&Monitors) -> f64| traj.monitors.iter().map(f).fold(0.0, f64::max);
    Ok(BootstrapReport {
        horizon: *traj.times.last().unwrap(),
        top_l2: BoundCheck::new(2.0 * epsilon, sup(|m| m.ztop_l2)),
        perp_l2: BoundCheck::new(epsilon.powf(3.0 - 1.5 * theta), sup(|m| m.zperp_l2)),
        full_s0: BoundCheck::new(3.0 * epsilon, sup(|m| m.hs0)),
        perp_s0: BoundCheck::new(epsilon * epsilon, sup(|m| m.zperp_hs0)),
    })
}
