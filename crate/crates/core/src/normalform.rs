//! Normal-form conjugations as finite-dimensional objects: the out-diagonal
//! flow `Ψ`, the transport flow `Φ`, the homological identities they rest on,
//! and the Poincaré step that puts the cubic field into strong-`Λ` form.
//!
//! Pair-basis operators act on `(u, ū)` coefficient vectors of length
//! `2(2K+1)`, the first half holding `u_k`, the second `ū` in the
//! `Ā_{k,j} = conj(A_{-k,-j})` convention of [`crate::paradiff`].

use ndarray::{s, Array1, Array2};
use ndarray_linalg::Solve;
use num_complex::Complex64;
use serde::Serialize;

use crate::fourier::{abs_pow, in_lambda, FourierField, I, ZERO};
use crate::linalg::{self, CMat};
use crate::paradiff::{conj_matrix, lattice_for, quantize_bw, v_op, z_op};
use crate::resonance::{classify, omega_sum, CubicKey, CubicTable};
use crate::symbol::{self, SymbolGrid};
use crate::Error;

/// Default expansion order of the normal form.
pub const DEFAULT_RHO: f64 = 4.0;
/// Initial number of RK4 steps in `τ`.
pub const FLOW_STEPS: usize = 16;
/// Successive step-halved flows must agree to this entrywise tolerance.
pub const FLOW_TOL: f64 = 1e-11;
const MAX_FLOW_STEPS: usize = 1 << 12;

#[derive(Clone, Debug, Serialize)]
pub struct FlowStep {
    pub steps: usize,
    /// Largest entry of the difference to the flow with half as many steps.
    pub difference: f64,
}

/// Time-one map of a pair-basis flow and of its inverse.
#[derive(Clone, Debug)]
pub struct FlowResult {
    pub k_max: usize,
    pub forward: CMat,
    pub inverse: CMat,
    pub generator_trace: Vec<FlowStep>,
}

impl FlowResult {
    /// `‖forward·inverse - I‖` as an `L² → L²` operator norm.
    pub fn inverse_defect(&self) -> Result<f64, Error> {
        let n = self.forward.nrows();
        linalg::max_singular_value(&(self.forward.dot(&self.inverse) - linalg::identity(n)))
    }

    /// `Ψ A Ψ^{-1}`.
    pub fn conjugate(&self, a: &CMat) -> CMat {
        self.forward.dot(a).dot(&self.inverse)
    }

    pub fn apply_pair(&self, w: &FourierField) -> (FourierField, FourierField) {
        apply_pair(&self.forward, w)
    }
}

/// Stacks `(w, w̄)` in the pair basis.
pub fn pair_vector(w: &FourierField) -> Array1<Complex64> {
    let n = w.len();
    let mut v = Array1::from_elem(2 * n, ZERO);
    for (i, c) in w.coeffs().iter().enumerate() {
        v[i] = *c;
        v[2 * n - 1 - i] = c.conj();
    }
    v
}

/// Applies a pair-basis operator to `(w, w̄)` and splits the result into the
/// `u`-component and the conjugated `ū`-component (equal for real-to-real
/// operators).
pub fn apply_pair(a: &CMat, w: &FourierField) -> (FourierField, FourierField) {
    let n = w.len();
    let out = a.dot(&pair_vector(w));
    let first = FourierField::from_vec(out.slice(s![..n]).to_vec()).expect("odd length");
    let second: Vec<Complex64> = (0..n).map(|i| out[2 * n - 1 - i].conj()).collect();
    (first, FourierField::from_vec(second).expect("odd length"))
}

fn rk4(dim: usize, steps: usize, gen: &dyn Fn(f64) -> CMat, left: bool) -> CMat {
    // left = false: Y' = G Y; left = true: Y' = -Y G.
    let h = 1.0 / steps as f64;
    let mut y = linalg::identity(dim);
    let f = |tau: f64, y: &CMat| -> CMat {
        let g = gen(tau);
        if left {
            -y.dot(&g)
        } else {
            g.dot(y)
        }
    };
    for n in 0..steps {
        let t = n as f64 * h;
        let hc = Complex64::new(h, 0.0);
        let k1 = f(t, &y);
        let k2 = f(t + 0.5 * h, &(&y + &k1.mapv(|z| z * hc * 0.5)));
        let k3 = f(t + 0.5 * h, &(&y + &k2.mapv(|z| z * hc * 0.5)));
        let k4 = f(t + h, &(&y + &k3.mapv(|z| z * hc)));
        let incr = (k1 + k2.mapv(|z| z * 2.0) + k3.mapv(|z| z * 2.0) + k4).mapv(|z| z * hc / 6.0);
        y = y + incr;
    }
    y
}

/// Integrates `∂_τ Ψ^τ = G(τ)Ψ^τ` and `∂_τ (Ψ^τ)^{-1} = -(Ψ^τ)^{-1}G(τ)` on
/// `[0, 1]` with RK4, doubling the number of steps until two successive
/// results agree to [`FLOW_TOL`].
pub fn integrate_flow(k_max: usize, gen: &dyn Fn(f64) -> CMat) -> Result<FlowResult, Error> {
    let dim = 2 * (2 * k_max + 1);
    let mut steps = FLOW_STEPS;
    let mut prev = rk4(dim, steps, gen, false);
    let mut trace = vec![FlowStep { steps, difference: f64::NAN }];
    loop {
        steps *= 2;
        let next = rk4(dim, steps, gen, false);
        let diff = linalg::max_abs_diff(&next, &prev);
        trace.push(FlowStep { steps, difference: diff });
        if !diff.is_finite() {
            return Err(Error::Diverged { t: 1.0, reason: "flow produced non-finite entries".into() });
        }
        prev = next;
        if diff < FLOW_TOL {
            break;
        }
        if steps >= MAX_FLOW_STEPS {
            return Err(Error::Diverged {
                t: 1.0,
                reason: format!("flow did not settle after {steps} steps (last difference {diff:e})"),
            });
        }
    }
    let inverse = rk4(dim, steps, gen, true);
    Ok(FlowResult { k_max, forward: prev, inverse, generator_trace: trace })
}

/// `-iΩ(D) = vOp(-i|ξ|^α)` on the pair basis.
pub fn linear_part(k_max: usize, alpha: f64) -> CMat {
    let km = k_max as i64;
    let d = Array2::from_diag(&Array1::from_iter((-km..=km).map(|k| -I * abs_pow(k as f64, alpha))));
    v_op(&d)
}

fn quantize_on(a: &SymbolGrid, k_max: usize) -> Result<CMat, Error> {
    Ok(quantize_bw(a, k_max)?.matrix)
}

/// Out-diagonal generator `G(u) = zOp(g₂(u))` with the homological symbol
/// solved to order `ρ`.
pub fn outdiag_generator(
    u: &FourierField,
    alpha: f64,
    rho: f64,
    k_max: usize,
) -> Result<(CMat, symbol::G2Symbols), Error> {
    let (nx, xi_max) = lattice_for(k_max);
    let g = symbol::sym_g2(u, alpha, rho, nx, xi_max)?;
    Ok((z_op(&quantize_on(&g.g2, k_max)?), g))
}

/// `Ψ(u)`: time-one flow of the out-diagonal generator.
pub fn flow_outdiag(u: &FourierField, alpha: f64, rho: f64, k_max: usize) -> Result<FlowResult, Error> {
    let (g, _) = outdiag_generator(u, alpha, rho, k_max)?;
    integrate_flow(k_max, &|_| g.clone())
}

/// `β₂(u)` and `∂_x β₂(u)` sampled on an `nx`-point grid.
fn beta_on_grid(u: &FourierField, alpha: f64, nx: usize) -> (Vec<f64>, Vec<f64>) {
    let c = symbol::beta2_coeffs(u, alpha);
    let beta = c.to_grid(nx).iter().map(|z| z.re).collect();
    let beta_x = c.dx().to_grid(nx).iter().map(|z| z.re).collect();
    (beta, beta_x)
}

/// `Φ(u)`: time-one flow of `vOp(β₂/(1+τ∂_xβ₂) iξ)`.
pub fn flow_transport(u: &FourierField, alpha: f64, k_max: usize) -> Result<FlowResult, Error> {
    let (nx, xi_max) = lattice_for(k_max);
    let (beta, beta_x) = beta_on_grid(u, alpha, nx);
    // 1 + τβ_x is affine in τ, so positivity at τ = 0, 1 suffices.
    let worst = beta_x.iter().cloned().fold(f64::INFINITY, f64::min);
    if 1.0 + worst <= 0.0 {
        return Err(Error::Invalid(format!("1 + ∂_xβ₂ reaches {:.3e}: not a diffeomorphism", 1.0 + worst)));
    }
    let gen = move |tau: f64| -> CMat {
        let f: Vec<Complex64> =
            beta.iter().zip(&beta_x).map(|(b, bx)| Complex64::new(b / (1.0 + tau * bx), 0.0)).collect();
        let a = SymbolGrid::from_x_values(nx, xi_max, 1.0, &f, |xi| I * xi);
        v_op(&quantize_on(&a, k_max).expect("lattice covers K"))
    };
    integrate_flow(k_max, &gen)
}

#[derive(Clone, Debug, Serialize)]
pub struct TransportIdentity {
    /// `max_m |2β₂(-iΩU, U) + underlineV - ⟨V⟩|` over the Fourier coefficients.
    pub residual: f64,
    /// `‖u‖²_{L²}`, the natural scale of each term.
    pub scale: f64,
}

/// Evaluates `2β₂(-iΩ(D)U, U) + underlineV(U) - ⟨V⟩(U)` coefficientwise.
pub fn verify_transport_identity(u: &FourierField, alpha: f64) -> TransportIdentity {
    let w = u.frac_d(alpha).scale_c(-I);
    let two_beta = symbol::beta2_bilinear_coeffs(&w, u, alpha).scale(2.0);
    let v = symbol::underline_v_coeffs(u);
    let res = symbol::res_v_coeffs(u);
    let km = two_beta.k_max().max(v.k_max()).max(res.k_max()) as i64;
    let residual = (-km..=km).map(|m| (two_beta.get(m) + v.get(m) - res.get(m)).norm()).fold(0.0, f64::max);
    TransportIdentity { residual, scale: u.coeffs().iter().map(|c| c.norm_sqr()).sum() }
}

// ---------------------------------------------------------------------------
// Block-diagonalization decay.

/// Quadratic part of the out-diagonal block after conjugation by `Ψ(u)`:
/// `Op(b) + (upper-right of [G, -iΩ]) - i Op(𝚏[g₂])`, where the last term is
/// `∂_t G` along the linear flow.
pub fn conjugated_outdiag_block(u: &FourierField, alpha: f64, rho: f64, k_max: usize) -> Result<CMat, Error> {
    let (nx, xi_max) = lattice_for(k_max);
    let (g, syms) = outdiag_generator(u, alpha, rho, k_max)?;
    let b = quantize_on(&symbol::sym_b(u, nx, xi_max), k_max)?;
    let f = quantize_on(&syms.f_g2, k_max)?;
    let l0 = linear_part(k_max, alpha);
    let comm = g.dot(&l0) - l0.dot(&g);
    let n = 2 * k_max + 1;
    let upper = comm.slice(s![..n, n..]).to_owned();
    Ok(b + upper - f.mapv(|z| z * I))
}

/// `Op(b)`, the out-diagonal block before conjugation.
pub fn unconjugated_outdiag_block(u: &FourierField, k_max: usize) -> Result<CMat, Error> {
    let (nx, xi_max) = lattice_for(k_max);
    quantize_on(&symbol::sym_b(u, nx, xi_max), k_max)
}

#[derive(Clone, Debug, Serialize)]
pub struct ShellNorm {
    /// Geometric centre of the shell.
    pub shell_center: f64,
    pub norm: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct DecayReport {
    pub rho: f64,
    pub alpha: f64,
    pub k_max: usize,
    /// Lowest output frequency at which the cutoff `χ` equals 1 for every
    /// spatial frequency of `b(u)`.
    pub plateau_start: i64,
    pub conjugated: Vec<ShellNorm>,
    pub baseline: Vec<ShellNorm>,
    /// Least-squares slope of `log norm` against `log shell_center`.
    pub conjugated_slope: f64,
    pub baseline_slope: f64,
}

/// Shells per octave used by [`verify_block_diagonalization`].
pub const SHELLS_PER_OCTAVE: u32 = 4;

/// `L² → L²` norms of the rows of `a` with output frequency in the shells
/// `2^{m/q} ≤ |k| < 2^{(m+1)/q}` (`q` shells per octave) lying inside
/// `[k_min, K]`. Shells with fewer than two integer frequencies are merged
/// upward.
pub fn shell_norms(a: &CMat, k_max: usize, k_min: i64, per_octave: u32) -> Result<Vec<ShellNorm>, Error> {
    let km = k_max as i64;
    let ratio = 2f64.powf(1.0 / per_octave as f64);
    let mut out = Vec::new();
    let mut lo = k_min.max(1);
    while lo <= km {
        let mut hi = ((lo as f64) * ratio).ceil() as i64 - 1;
        hi = hi.max(lo + 1);
        if hi > km {
            break;
        }
        let rows: Vec<usize> =
            (-km..=km).filter(|k| k.abs() >= lo && k.abs() <= hi).map(|k| (k + km) as usize).collect();
        let sub = Array2::from_shape_fn((rows.len(), a.ncols()), |(r, c)| a[[rows[r], c]]);
        out.push(ShellNorm { shell_center: ((lo * hi) as f64).sqrt(), norm: linalg::max_singular_value(&sub)? });
        lo = hi + 1;
    }
    Ok(out)
}

/// Least-squares slope of `log y` against `log x`.
pub fn loglog_slope(points: &[(f64, f64)]) -> f64 {
    let pts: Vec<(f64, f64)> = points.iter().filter(|(_, y)| *y > 0.0).map(|(x, y)| (x.ln(), y.ln())).collect();
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}

/// First output frequency `k` such that `χ(m, ξ) = 1` for every `|m| ≤ m_max`
/// and every `ξ = k - m/2`.
pub fn cutoff_plateau(m_max: i64) -> i64 {
    // 2|m| ≤ δ0⟨ξ⟩ with ξ ≥ k - m/2.
    let need = 2.0 * m_max as f64 / crate::symbol::DELTA0 + 0.5 * m_max as f64;
    need.ceil() as i64
}

/// Decay of the out-diagonal block with and without the conjugation by `Ψ`,
/// over [`SHELLS_PER_OCTAVE`] shells per octave on the plateau of the cutoff.
pub fn verify_block_diagonalization(
    u: &FourierField,
    alpha: f64,
    rho: f64,
    k_max: usize,
) -> Result<DecayReport, Error> {
    let m_max = 2 * u.modes().filter(|(_, c)| *c != ZERO).map(|(k, _)| k.abs()).max().unwrap_or(0);
    let start = cutoff_plateau(m_max);
    let conj = shell_norms(&conjugated_outdiag_block(u, alpha, rho, k_max)?, k_max, start, SHELLS_PER_OCTAVE)?;
    let base = shell_norms(&unconjugated_outdiag_block(u, k_max)?, k_max, start, SHELLS_PER_OCTAVE)?;
    let slope = |v: &[ShellNorm]| loglog_slope(&v.iter().map(|s| (s.shell_center, s.norm)).collect::<Vec<_>>());
    Ok(DecayReport {
        rho,
        alpha,
        k_max,
        plateau_start: start,
        conjugated_slope: slope(&conj),
        baseline_slope: slope(&base),
        conjugated: conj,
        baseline: base,
    })
}

/// Decay in `ξ` of the remainder left by the out-diagonal homological
/// equation.
#[derive(Clone, Debug, Serialize)]
pub struct ResidualDecay {
    pub rho: f64,
    pub p: usize,
    /// `(ξ, sup_x |r₂(x, ξ)|)` on the lattice rows with `ξ ≥ xi_min`.
    pub profile: Vec<(f64, f64)>,
    pub slope: f64,
}

/// Log-log slope of `sup_x |r₂(x, ξ)|` over `ξ ≥ xi_min`.
pub fn g2_residual_decay(
    u: &FourierField,
    alpha: f64,
    rho: f64,
    k_max: usize,
    xi_min: f64,
) -> Result<ResidualDecay, Error> {
    let (nx, xm) = lattice_for(k_max);
    let g = symbol::sym_g2(u, alpha, rho, nx, xm)?;
    let sup = g.residual.row_sup();
    let profile: Vec<(f64, f64)> =
        (0..g.residual.n_xi()).map(|h| (g.residual.xi(h), sup[h])).filter(|&(xi, r)| xi >= xi_min && r > 0.0).collect();
    let slope = if profile.len() < 2 { f64::NEG_INFINITY } else { loglog_slope(&profile) };
    Ok(ResidualDecay { rho, p: g.p, profile, slope })
}

// ---------------------------------------------------------------------------
// Poincaré step on the cubic field.

/// Whether the tuple lies in `𝒞 = ∪_{n≤2} 𝔕^{(n)} ∪ 𝔓^{(3)} ∪ 𝔓^{(4)}`.
pub fn in_kept_set(key: &CubicKey, alpha: f64) -> bool {
    let tag = classify(&key.tuple(), alpha);
    tag.n_outside >= 3 || tag.resonant
}

/// `X/(iω)` for a tuple of `𝔓^{(1,2)} \ 𝔕^{(1,2)}`; a resonant tuple is a
/// hard error.
pub fn homological_coefficient(key: &CubicKey, value: Complex64, alpha: f64) -> Result<Complex64, Error> {
    let t = key.tuple();
    if classify(&t, alpha).resonant {
        return Err(Error::ResonantDivision(format!("{t:?}")));
    }
    Ok(value / (I * omega_sum(&t, alpha)))
}

/// Generator of the Poincaré step, stored as a cubic vector field
/// `Q(U)^σ_k = Σ Q^{σ⃗,σ}_{j⃗,k} u^{σ1}_{j1} u^{σ2}_{j2} u^{σ3}_{j3}`.
#[derive(Clone, Debug)]
pub struct Q2Table {
    pub alpha: f64,
    pub table: CubicTable,
    /// `min |ω|` over the divided tuples of `𝔓^{(1)}`.
    pub min_divisor_p1: f64,
    /// `min |ω| max|j|^{1-α}` over the divided tuples of `𝔓^{(2)}`.
    pub min_weighted_divisor_p2: f64,
}

/// Solves `Y = X - iωQ` with `Y` supported on `𝒞`.
pub fn build_q2(x: &CubicTable, alpha: f64) -> Result<Q2Table, Error> {
    let mut entries = Vec::new();
    let (mut m1, mut m2) = (f64::INFINITY, f64::INFINITY);
    for (key, v) in x.iter() {
        if in_kept_set(key, alpha) {
            continue;
        }
        let t = key.tuple();
        let w = omega_sum(&t, alpha).abs();
        match t.n_outside() {
            1 => m1 = m1.min(w),
            2 => m2 = m2.min(w * (t.max_abs() as f64).powf(1.0 - alpha)),
            _ => {}
        }
        entries.push((*key, homological_coefficient(key, *v, alpha)?));
    }
    let table =
        CubicTable::from_fn(x.j_max, |k| entries.binary_search_by(|(e, _)| e.cmp(k)).map_or(ZERO, |i| entries[i].1));
    Ok(Q2Table { alpha, table, min_divisor_p1: m1, min_weighted_divisor_p2: m2 })
}

/// Cubic part of the conjugated field in coefficient form: `X - iωQ`.
pub fn conjugated_cubic_table(x: &CubicTable, q: &Q2Table) -> CubicTable {
    let alpha = q.alpha;
    CubicTable::from_fn(x.j_max, |k| x.get(k) - I * omega_sum(&k.tuple(), alpha) * q.table.get(k))
}

/// The map `Z = F(U) = U + Q(U)` on `|k| ≤ J`, and the field it produces
/// from `∂_t U = -iΩU + X(U)`.
#[derive(Clone, Debug)]
pub struct PoincareMap {
    pub alpha: f64,
    pub x: CubicTable,
    pub q: Q2Table,
}

#[derive(Clone, Debug, Serialize)]
pub struct NewtonInfo {
    pub iterations: usize,
    pub residual: f64,
}

fn to_real(u: &FourierField) -> Array1<f64> {
    Array1::from_iter(u.coeffs().iter().flat_map(|c| [c.re, c.im]))
}

fn from_real(v: &Array1<f64>) -> FourierField {
    FourierField::from_vec(v.as_slice().unwrap().chunks(2).map(|p| Complex64::new(p[0], p[1])).collect())
        .expect("odd length")
}

/// Five-point directional derivative, exact for polynomials of degree ≤ 4.
fn directional(f: &dyn Fn(&FourierField) -> FourierField, u: &FourierField, v: &FourierField, h: f64) -> FourierField {
    let at = |t: f64| f(&u.add_field(&v.scale(t)));
    let mut out = at(h).sub_field(&at(-h)).scale(8.0);
    out = out.sub_field(&at(2.0 * h).sub_field(&at(-2.0 * h)));
    out.scale(1.0 / (12.0 * h))
}

impl PoincareMap {
    pub fn new(x: CubicTable, alpha: f64) -> Result<Self, Error> {
        let q = build_q2(&x, alpha)?;
        Ok(Self { alpha, x, q })
    }

    pub fn j_max(&self) -> usize {
        self.x.j_max as usize
    }

    pub fn forward(&self, u: &FourierField) -> FourierField {
        u.add_field(&self.q.table.evaluate(u).0.resized(self.j_max()))
    }

    /// `U = F^{-1}(Z)` by Newton's method with the identity as initial guess
    /// and a real Jacobian assembled from exact directional derivatives.
    pub fn inverse(&self, z: &FourierField) -> Result<(FourierField, NewtonInfo), Error> {
        let f = |u: &FourierField| self.forward(u);
        let mut u = z.clone();
        let n = 2 * z.len();
        let scale = z.sobolev_norm(0.0).max(1e-300);
        for it in 1..=12 {
            let r = f(&u).sub_field(z);
            let res = r.sobolev_norm(0.0);
            if res <= 1e-15 * scale {
                return Ok((u, NewtonInfo { iterations: it - 1, residual: res }));
            }
            let mut jac = Array2::<f64>::zeros((n, n));
            for c in 0..n {
                let mut e = Array1::<f64>::zeros(n);
                e[c] = 1.0;
                let d = directional(&f, &u, &from_real(&e), scale.max(1e-3));
                jac.column_mut(c).assign(&to_real(&d));
            }
            let step = jac.solve(&to_real(&r)).map_err(|e| Error::Linalg(e.to_string()))?;
            u = u.sub_field(&from_real(&step));
        }
        let res = f(&u).sub_field(z).sobolev_norm(0.0);
        if res <= 1e-13 * scale {
            return Ok((u, NewtonInfo { iterations: 12, residual: res }));
        }
        Err(Error::Diverged { t: 0.0, reason: format!("Newton inversion stalled at residual {res:e}") })
    }

    /// Nonlinear part of the field in the new variable:
    /// `dF(U)[-iΩU + X(U)] + iΩZ` with `U = F^{-1}(Z)`.
    pub fn conjugated_nonlinearity(&self, z: &FourierField) -> Result<FourierField, Error> {
        let (u, _) = self.inverse(z)?;
        let jm = self.j_max();
        let lin = u.frac_d(self.alpha).scale_c(-I);
        let v = lin.add_field(&self.x.evaluate(&u).0.resized(jm));
        let h = u.sobolev_norm(0.0).max(1e-3) / v.sobolev_norm(0.0).max(1e-300);
        let dz = directional(&|w: &FourierField| self.forward(w), &u, &v, h);
        Ok(dz.add_field(&z.frac_d(self.alpha).scale_c(I)))
    }
}

/// Cubic part of a field `N` with `N(λZ) = λ³Y₃(Z) + λ⁵Y₅(Z) + …`, by
/// Richardson elimination of the λ² and λ⁴ terms at `λ, λ/2, λ/4`.
pub fn extract_cubic(
    field: &dyn Fn(&FourierField) -> Result<FourierField, Error>,
    z: &FourierField,
    lambda: f64,
) -> Result<(FourierField, f64), Error> {
    let y = |l: f64| -> Result<FourierField, Error> { Ok(field(&z.scale(l))?.scale(1.0 / (l * l * l))) };
    let (y1, y2, y3) = (y(lambda)?, y(lambda / 2.0)?, y(lambda / 4.0)?);
    let r1 = y2.scale(4.0).sub_field(&y1).scale(1.0 / 3.0);
    let r2 = y3.scale(4.0).sub_field(&y2).scale(1.0 / 3.0);
    let fin = r2.scale(16.0).sub_field(&r1).scale(1.0 / 15.0);
    // Difference between the last two elimination levels as an error proxy.
    let err = fin.max_abs_diff(&r2);
    Ok((fin, err))
}

fn project_output(f: &FourierField, tangential: bool) -> FourierField {
    let mut out = FourierField::zeros(f.k_max());
    for (k, c) in f.modes() {
        if in_lambda(k) == tangential {
            out.set(k, c);
        }
    }
    out
}

#[derive(Clone, Debug, Serialize)]
pub struct LambdaBlocks {
    /// `max |Π_{𝔓^{(0)}}Y - closed form|` on the sample.
    pub p0_residual: f64,
    /// `max |Π_{𝔓^{(0)}}Y|` on the sample.
    pub p0_size: f64,
    /// `max |Π_{𝔓^{(1)}}Y|` on the sample.
    pub p1: f64,
    /// `max |Π_{𝔓^{(2)}}Y|` on the sample.
    pub p2: f64,
    /// Difference between the last two Richardson levels, maximized over
    /// the samples.
    pub extraction_error: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct StrongLambdaReport {
    pub alpha: f64,
    pub j_max: usize,
    /// Blocks of the cubic field before the Poincaré step.
    pub before: LambdaBlocks,
    /// Blocks of the conjugated field.
    pub after: LambdaBlocks,
    pub newton_iterations: usize,
    pub min_divisor_p1: f64,
    pub min_weighted_divisor_p2: f64,
}

/// `-i|z₁|²z₁ e^{ix} + i|z₋₁|²z₋₁ e^{-ix}`.
pub fn y_str_closed_form(z: &FourierField) -> FourierField {
    let mut out = FourierField::zeros(z.k_max());
    let (a, b) = (z.get(1), z.get(-1));
    out.set(1, -I * a.norm_sqr() * a);
    out.set(-1, I * b.norm_sqr() * b);
    out
}

/// Splits the cubic part `Y` of `field` into the blocks `Π_{𝔓^{(n)}}Y`,
/// `n = 0, 1, 2`, evaluated at `Z = Z^⊤ + Z^⊥`, and compares them with the
/// strong-`Λ` form. `Y(Z^⊤ + μZ^⊥) = A + μB + μ²C + μ³D` is resolved from
/// `μ ∈ {0, ±1, 2}`; then `Π_{𝔓^{(0)}}Y = Π^⊤A`,
/// `Π_{𝔓^{(1)}}Y = Π^⊥A + Π^⊤B`, `Π_{𝔓^{(2)}}Y = Π^⊥B + Π^⊤C`.
pub fn verify_strong_lambda(
    field: &dyn Fn(&FourierField) -> Result<FourierField, Error>,
    z_top: &FourierField,
    z_perp: &FourierField,
    lambda: f64,
) -> Result<LambdaBlocks, Error> {
    let mut err = 0.0f64;
    let mut y = |mu: f64| -> Result<FourierField, Error> {
        let (v, e) = extract_cubic(field, &z_top.add_field(&z_perp.scale(mu)), lambda)?;
        err = err.max(e);
        Ok(v)
    };
    let a = y(0.0)?;
    let yp = y(1.0)?;
    let ym = y(-1.0)?;
    let y2 = y(2.0)?;
    let c = yp.add_field(&ym).scale(0.5).sub_field(&a);
    let b_plus_d = yp.sub_field(&ym).scale(0.5);
    let two_b_8d = y2.sub_field(&a).sub_field(&c.scale(4.0));
    let b = b_plus_d.scale(8.0).sub_field(&two_b_8d).scale(1.0 / 6.0);
    let p0 = project_output(&a, true);
    let p1 = project_output(&a, false).add_field(&project_output(&b, true));
    let p2 = project_output(&b, false).add_field(&project_output(&c, true));
    let closed = y_str_closed_form(z_top);
    let max_abs = |f: &FourierField| f.coeffs().iter().map(|c| c.norm()).fold(0.0, f64::max);
    Ok(LambdaBlocks {
        p0_residual: p0.max_abs_diff(&closed),
        p0_size: max_abs(&p0),
        p1: max_abs(&p1),
        p2: max_abs(&p2),
        extraction_error: err,
    })
}

/// λ used for the cubic extraction (with `λ/2`, `λ/4`).
pub const EXTRACTION_LAMBDA: f64 = 1.0 / 16.0;

/// Runs the Poincaré step on the renormalized cubic field with indexes up to
/// `J` and checks the strong-`Λ` form of the conjugated field on a sample.
pub fn strong_lambda_check(
    j_max: usize,
    alpha: f64,
    z_top: &FourierField,
    z_perp: &FourierField,
) -> Result<StrongLambdaReport, Error> {
    let map = PoincareMap::new(crate::resonance::x3_table(j_max as i64), alpha)?;
    let (zt, zp) = (z_top.resized(j_max), z_perp.resized(j_max));
    let original = |z: &FourierField| Ok(map.x.evaluate(z).0.resized(j_max));
    let before = verify_strong_lambda(&original, &zt, &zp, EXTRACTION_LAMBDA)?;
    let conjugated = |z: &FourierField| map.conjugated_nonlinearity(z);
    let after = verify_strong_lambda(&conjugated, &zt, &zp, EXTRACTION_LAMBDA)?;
    let (_, info) = map.inverse(&zt.add_field(&zp))?;
    Ok(StrongLambdaReport {
        alpha,
        j_max,
        before,
        after,
        newton_iterations: info.iterations,
        min_divisor_p1: map.q.min_divisor_p1,
        min_weighted_divisor_p2: map.q.min_weighted_divisor_p2,
    })
}

/// Upper-left block of a pair-basis operator minus its counterpart in `b`.
pub fn diagonal_block_deviation(a: &CMat, b: &CMat) -> f64 {
    let n = a.nrows() / 2;
    linalg::max_abs_diff(&a.slice(s![..n, ..n]).to_owned(), &b.slice(s![..n, ..n]).to_owned())
}

/// `Op(conj a^∨)` as seen in the lower-right block of `vOp(a)`.
pub fn lower_block(a: &CMat) -> CMat {
    let n = a.nrows() / 2;
    a.slice(s![n.., n..]).to_owned()
}

/// Whether the lower-right block is the conjugate of the upper-left one.
pub fn reality_defect(a: &CMat) -> f64 {
    let n = a.nrows() / 2;
    let ul = a.slice(s![..n, ..n]).to_owned();
    let ur = a.slice(s![..n, n..]).to_owned();
    let ll = a.slice(s![n.., ..n]).to_owned();
    let lr = lower_block(a);
    linalg::max_abs_diff(&conj_matrix(&ul), &lr).max(linalg::max_abs_diff(&conj_matrix(&ur), &ll))
}
