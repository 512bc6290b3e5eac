//! Bony-Weyl and Weyl quantization as dense matrices on the truncated Fourier
//! basis, symbolic composition, Poisson brackets and the operator checks built
//! on them.
//!
//! `Op(a)` acts on `u = Σ u_j e^{ijx}` by
//! `(Op(a)u)_k = Σ_j χ(k-j, (k+j)/2) â(k-j, (k+j)/2) u_j`, where `â(m, ξ)` is
//! the `m`-th spatial Fourier coefficient of `a(·, ξ)`.

use std::io::Write;

use ndarray::{s, Array2};
use num_complex::Complex64;

use crate::fourier::{japanese, FourierField, ZERO};
use crate::linalg::{self, CMat};
use crate::symbol::{CutoffFamily, SymbolGrid, DELTA0, XI_MARGIN};
use crate::Error;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Provenance {
    Quantized,
    Commutator,
    Flow,
    Composition,
}

/// Dense matrix on the basis `k ∈ [-K, K]` with a declared order.
#[derive(Clone, Debug)]
pub struct ParaOperator {
    pub k_max: usize,
    pub order: f64,
    pub provenance: Provenance,
    pub matrix: CMat,
}

impl ParaOperator {
    pub fn new(k_max: usize, order: f64, provenance: Provenance, matrix: CMat) -> Self {
        assert_eq!(matrix.nrows(), 2 * k_max + 1);
        Self { k_max, order, provenance, matrix }
    }

    pub fn dim(&self) -> usize {
        2 * self.k_max + 1
    }

    /// Entry `A_{k,j}`.
    pub fn entry(&self, k: i64, j: i64) -> Complex64 {
        let km = self.k_max as i64;
        self.matrix[[(k + km) as usize, (j + km) as usize]]
    }

    pub fn compose(&self, other: &ParaOperator) -> ParaOperator {
        assert_eq!(self.k_max, other.k_max);
        ParaOperator::new(self.k_max, self.order + other.order, Provenance::Composition, self.matrix.dot(&other.matrix))
    }

    /// `[A, B] = AB - BA`.
    pub fn commutator(&self, other: &ParaOperator) -> ParaOperator {
        assert_eq!(self.k_max, other.k_max);
        let m = self.matrix.dot(&other.matrix) - other.matrix.dot(&self.matrix);
        ParaOperator::new(self.k_max, self.order + other.order - 1.0, Provenance::Commutator, m)
    }

    pub fn adjoint(&self) -> ParaOperator {
        ParaOperator { matrix: linalg::adjoint(&self.matrix), ..self.clone() }
    }

    /// `Ā`, defined by `Ā u = conj(A ū)`: `(Ā)_{k,j} = conj(A_{-k,-j})`.
    pub fn conj_op(&self) -> ParaOperator {
        ParaOperator { matrix: conj_matrix(&self.matrix), ..self.clone() }
    }

    /// Restriction to a smaller centred block.
    pub fn restrict(&self, k_small: usize) -> ParaOperator {
        ParaOperator::new(k_small, self.order, self.provenance, linalg::restrict(&self.matrix, self.k_max, k_small))
    }

    /// Writes nonzero entries as CSV `k, j, re, im`.
    pub fn write_csv(&self, mut w: impl Write) -> std::io::Result<()> {
        writeln!(w, "k,j,re,im")?;
        let km = self.k_max as i64;
        for ((r, c), z) in self.matrix.indexed_iter() {
            if *z != ZERO {
                writeln!(w, "{},{},{:.17e},{:.17e}", r as i64 - km, c as i64 - km, z.re, z.im)?;
            }
        }
        Ok(())
    }
}

/// `(Ā)_{k,j} = conj(A_{-k,-j})`.
pub fn conj_matrix(a: &CMat) -> CMat {
    let n = a.nrows();
    Array2::from_shape_fn((n, n), |(r, c)| a[[n - 1 - r, n - 1 - c]].conj())
}

/// Radius of the auxiliary basis on which products are formed before being
/// restricted back to `K`, so that no intermediate frequency is lost to the
/// truncation.
pub fn extended_radius(k_max: usize) -> usize {
    k_max + (DELTA0 * (k_max + 1) as f64).ceil() as usize + 2
}

/// Symbol lattice `(M, Ξ)` large enough to quantize on the extended basis of
/// radius `K`.
pub fn lattice_for(k_max: usize) -> (usize, usize) {
    let xi_max = extended_radius(k_max) + XI_MARGIN;
    (crate::fourier::grid_size(4 * xi_max + 4), xi_max)
}

fn quantize_impl(a: &SymbolGrid, k_max: usize, cutoff: Option<&CutoffFamily>) -> Result<CMat, Error> {
    if a.xi_max() < k_max {
        return Err(Error::Invalid(format!("symbol lattice Ξ = {} is smaller than K = {k_max}", a.xi_max())));
    }
    let km = k_max as i64;
    let n = 2 * k_max + 1;
    let nx = a.nx() as i64;
    let mut out = Array2::from_elem((n, n), ZERO);
    for xi2 in -2 * km..=2 * km {
        let h = a.row_of(xi2).expect("row inside lattice");
        let xi = 0.5 * xi2 as f64;
        let hat = a.spectral_row(h);
        // k + j = xi2 with |k|, |j| ≤ K.
        let k_lo = (xi2 - km).max(-km);
        let k_hi = (xi2 + km).min(km);
        for k in k_lo..=k_hi {
            let j = xi2 - k;
            let m = k - j;
            let weight = match cutoff {
                Some(c) => c.chi(m as f64, xi),
                None => 1.0,
            };
            if weight == 0.0 {
                continue;
            }
            if 2 * m.abs() >= nx {
                continue;
            }
            out[[(k + km) as usize, (j + km) as usize]] = hat[m.rem_euclid(nx) as usize] * weight;
        }
    }
    Ok(out)
}

/// Bony-Weyl quantization with the default cutoff.
pub fn quantize_bw(a: &SymbolGrid, k_max: usize) -> Result<ParaOperator, Error> {
    quantize_bw_with(a, k_max, &CutoffFamily::default())
}

pub fn quantize_bw_with(a: &SymbolGrid, k_max: usize, cutoff: &CutoffFamily) -> Result<ParaOperator, Error> {
    Ok(ParaOperator::new(k_max, a.order, Provenance::Quantized, quantize_impl(a, k_max, Some(cutoff))?))
}

/// Weyl quantization without the frequency cutoff.
pub fn quantize_weyl(a: &SymbolGrid, k_max: usize) -> Result<ParaOperator, Error> {
    Ok(ParaOperator::new(k_max, a.order, Provenance::Quantized, quantize_impl(a, k_max, None)?))
}

/// Bony-Weyl quantization of a separable symbol `f(x)·w(ξ)` with `f` a
/// trigonometric polynomial, stored by diagonals. Agrees with
/// [`quantize_bw`] entry by entry but never forms the dense matrix.
#[derive(Clone, Debug)]
pub struct BandOperator {
    pub k_max: usize,
    /// Offset `m = k - j` and the diagonal indexed by the row `k + K`.
    pub diags: Vec<(i64, Vec<Complex64>)>,
}

pub fn quantize_separable_banded(f: &FourierField, w: impl Fn(f64) -> f64, k_max: usize) -> BandOperator {
    let cutoff = CutoffFamily::default();
    let km = k_max as i64;
    let mut diags = Vec::new();
    for (m, c) in f.modes() {
        if c == ZERO || m.abs() > 2 * km {
            continue;
        }
        let d = (-km..=km)
            .map(|k| {
                let j = k - m;
                if j.abs() > km {
                    return ZERO;
                }
                let xi = 0.5 * (k + j) as f64;
                c * (cutoff.chi(m as f64, xi) * w(xi))
            })
            .collect();
        diags.push((m, d));
    }
    BandOperator { k_max, diags }
}

impl BandOperator {
    pub fn zeros(k_max: usize) -> Self {
        Self { k_max, diags: Vec::new() }
    }

    /// Diagonal operator `k ↦ d(k)`.
    pub fn diagonal(k_max: usize, d: impl Fn(i64) -> Complex64) -> Self {
        let km = k_max as i64;
        Self { k_max, diags: vec![(0, (-km..=km).map(d).collect())] }
    }

    pub fn scale(&self, c: Complex64) -> Self {
        let diags = self.diags.iter().map(|(m, d)| (*m, d.iter().map(|z| z * c).collect())).collect();
        Self { k_max: self.k_max, diags }
    }

    pub fn add(&self, other: &BandOperator) -> Self {
        assert_eq!(self.k_max, other.k_max);
        let mut out = self.clone();
        for (m, d) in &other.diags {
            match out.diags.iter_mut().find(|(o, _)| o == m) {
                Some((_, e)) => e.iter_mut().zip(d).for_each(|(a, b)| *a += b),
                None => out.diags.push((*m, d.clone())),
            }
        }
        out
    }

    /// Zeroes the rows and columns of the given modes.
    pub fn remove_modes(&mut self, modes: &[i64]) {
        let km = self.k_max as i64;
        for (m, d) in self.diags.iter_mut() {
            for &k in modes {
                if k.abs() <= km {
                    d[(k + km) as usize] = ZERO;
                }
                let row = k + *m;
                if row.abs() <= km {
                    d[(row + km) as usize] = ZERO;
                }
            }
        }
    }

    pub fn apply(&self, u: &FourierField) -> FourierField {
        assert_eq!(u.k_max(), self.k_max);
        let km = self.k_max as i64;
        let mut out = vec![ZERO; 2 * self.k_max + 1];
        let uc = u.coeffs();
        for (m, d) in &self.diags {
            let lo = (-km).max(-km + m);
            let hi = km.min(km + m);
            for k in lo..=hi {
                out[(k + km) as usize] += d[(k + km) as usize] * uc[(k - m + km) as usize];
            }
        }
        FourierField::from_vec(out).expect("odd length")
    }

    /// `max_k Σ_j |A_{kj}|`.
    pub fn row_norm(&self) -> f64 {
        let n = 2 * self.k_max + 1;
        (0..n).map(|r| self.diags.iter().map(|(_, d)| d[r].norm()).sum::<f64>()).fold(0.0, f64::max)
    }

    pub fn to_dense(&self) -> CMat {
        let km = self.k_max as i64;
        let n = 2 * self.k_max + 1;
        let mut out = Array2::from_elem((n, n), ZERO);
        for (m, d) in &self.diags {
            for k in -km..=km {
                let j = k - m;
                if j.abs() <= km {
                    out[[(k + km) as usize, (j + km) as usize]] = d[(k + km) as usize];
                }
            }
        }
        out
    }
}

/// Whether `(k, j)` lies in the band `(1-δ0)/(1+δ0)|k| ≤ |j| ≤ (1+δ0)/(1-δ0)|k|`.
pub fn in_band(k: i64, j: i64, delta0: f64) -> bool {
    let (k, j) = (k.abs() as f64, j.abs() as f64);
    let lo = (1.0 - delta0) / (1.0 + delta0);
    let hi = (1.0 + delta0) / (1.0 - delta0);
    j >= lo * k - 1e-12 && j <= hi * k + 1e-12
}

/// Largest entry of `A` outside the band.
pub fn band_violation(a: &ParaOperator, delta0: f64) -> f64 {
    let km = a.k_max as i64;
    let mut worst = 0.0f64;
    for k in -km..=km {
        for j in -km..=km {
            if !in_band(k, j, delta0) {
                worst = worst.max(a.entry(k, j).norm());
            }
        }
    }
    worst
}

// ---------------------------------------------------------------------------
// Pair-basis operators acting on `(u, ū)`.

/// `vOp(a) = diag(Op(a), Op(conj a^∨))` on the pair basis.
pub fn v_op(a: &CMat) -> CMat {
    let n = a.nrows();
    let mut out = Array2::from_elem((2 * n, 2 * n), ZERO);
    out.slice_mut(s![..n, ..n]).assign(a);
    out.slice_mut(s![n.., n..]).assign(&conj_matrix(a));
    out
}

/// `zOp(b) = [[0, Op(b)], [Op(conj b^∨), 0]]` on the pair basis.
pub fn z_op(b: &CMat) -> CMat {
    let n = b.nrows();
    let mut out = Array2::from_elem((2 * n, 2 * n), ZERO);
    out.slice_mut(s![..n, n..]).assign(b);
    out.slice_mut(s![n.., ..n]).assign(&conj_matrix(b));
    out
}

/// Upper-right block of a pair-basis operator.
pub fn off_diagonal_block(a: &CMat) -> CMat {
    let n = a.nrows() / 2;
    a.slice(s![..n, n..]).to_owned()
}

// ---------------------------------------------------------------------------
// Symbolic calculus.

fn factorial(k: u32) -> f64 {
    (1..=k).map(|i| i as f64).product()
}

/// `a #_ρ b = Σ_{k≤ρ} 2^{-k} Σ_{ℓ+β=k} (-1)^β/(ℓ!β!) (∂_ξ^ℓ D_x^β a)(∂_ξ^β D_x^ℓ b)`.
pub fn compose_expansion(a: &SymbolGrid, b: &SymbolGrid, rho: u32) -> SymbolGrid {
    assert!(a.same_lattice(b), "symbols live on different lattices");
    let mut out = a.mul(b);
    for k in 1..=rho {
        for l in 0..=k {
            let beta = k - l;
            let c = 2f64.powi(-(k as i32)) * if beta % 2 == 0 { 1.0 } else { -1.0 } / (factorial(l) * factorial(beta));
            let left = a.d_x(beta).dxi(l);
            let right = b.d_x(l).dxi(beta);
            out = out.add(&left.mul(&right).scale(Complex64::new(c, 0.0)));
        }
    }
    out.with_order(a.order + b.order)
}

/// `{a, b} = ∂_ξ a ∂_x b - ∂_x a ∂_ξ b`.
pub fn poisson_bracket(a: &SymbolGrid, b: &SymbolGrid) -> SymbolGrid {
    let p = a.dxi(1).mul(&b.dx(1)).sub(&a.dx(1).mul(&b.dxi(1)));
    p.with_order(a.order + b.order - 1.0)
}

/// `Op(a)Op(b) - Op(a #_ρ b)` on radius `K`. Products are formed on the
/// extended basis and restricted afterwards; the symbols must be sampled on a
/// lattice with `Ξ ≥ extended_radius(K)`.
pub fn remainder_operator(a: &SymbolGrid, b: &SymbolGrid, rho: u32, k_max: usize) -> Result<ParaOperator, Error> {
    let ke = extended_radius(k_max);
    let opa = quantize_bw(a, ke)?;
    let opb = quantize_bw(b, ke)?;
    let opab = quantize_bw(&compose_expansion(a, b, rho), ke)?;
    let r = opa.matrix.dot(&opb.matrix) - opab.matrix;
    Ok(ParaOperator::new(
        k_max,
        a.order + b.order - rho as f64,
        Provenance::Composition,
        linalg::restrict(&r, ke, k_max),
    ))
}

/// Norm of the composition remainder as a map `H^s → H^{s-(m+m')+ρ}`.
pub fn remainder_norm(a: &SymbolGrid, b: &SymbolGrid, rho: u32, k_max: usize, s: f64) -> Result<f64, Error> {
    let r = remainder_operator(a, b, rho, k_max)?;
    let gain = a.order + b.order - rho as f64;
    linalg::sobolev_op_norm(&r.matrix, k_max, s, s - gain)
}

/// Same norm restricted to the top shell `K/2 ≤ |k|, |j| ≤ K`, with target
/// space `H^{s-(m+m')}`; used to measure decay of the remainder in `K`.
pub fn remainder_shell_norm(a: &SymbolGrid, b: &SymbolGrid, rho: u32, k_max: usize, s: f64) -> Result<f64, Error> {
    let r = remainder_operator(a, b, rho, k_max)?;
    let order = a.order + b.order;
    let w_out = linalg::sobolev_weights(k_max, s - order);
    let w_in = linalg::sobolev_weights(k_max, -s);
    let km = k_max as i64;
    let lo = (k_max / 2) as i64;
    let shell: Vec<usize> = (-km..=km).filter(|k| k.abs() >= lo).map(|k| (k + km) as usize).collect();
    let mut m = Array2::from_elem((shell.len(), shell.len()), ZERO);
    for (a_i, &r_i) in shell.iter().enumerate() {
        for (b_i, &c_i) in shell.iter().enumerate() {
            m[[a_i, b_i]] = r.matrix[[r_i, c_i]] * w_out[r_i] * w_in[c_i];
        }
    }
    linalg::max_singular_value(&m)
}

// ---------------------------------------------------------------------------
// Garding check.

#[derive(Clone, Debug, serde::Serialize)]
pub struct GardingReport {
    /// Smallest eigenvalue of the weighted symmetrized operator.
    pub min_quadform: f64,
    /// `Σ_{d≤3} sup|∂_x^d a|`.
    pub a_w3_norm: f64,
    /// Smallest `C` with `min_quadform ≥ -C ‖a‖_{W^{3,∞}}/R²`.
    pub c_measured: f64,
    /// `-c_measured ‖a‖_{W^{3,∞}}/R²`.
    pub bound: f64,
}

/// Minimal eigenvalue of `sym(D_s^{-1} Op(a ψ²) D_s^{-1})` against the bound
/// `-C ‖a‖_{W^{3,∞}}/R²`.
pub fn garding_check(
    a_func: &SymbolGrid,
    psi: &SymbolGrid,
    r: f64,
    s: f64,
    k_max: usize,
) -> Result<GardingReport, Error> {
    let h0 = a_func.n_xi() / 2;
    let min_a = (0..a_func.nx()).map(|m| a_func.at(h0, m).re).fold(f64::INFINITY, f64::min);
    if min_a < -1e-12 {
        return Err(Error::Invalid(format!("Garding check needs a(x) ≥ 0, found min {min_a:.3e}")));
    }
    let sym = a_func.mul(&psi.mul(psi));
    let op = quantize_bw(&sym, k_max)?;
    let w = linalg::sobolev_weights(k_max, -s);
    let weighted = linalg::scale_rows_cols(&op.matrix, &w, &w);
    let lam = linalg::min_eigenvalue(&linalg::hermitian_part(&weighted))?;
    let a_w3_norm: f64 = (0..=3u32).map(|d| a_func.dx(d).row_sup()[h0]).sum();
    let c_measured = if a_w3_norm > 0.0 { (-lam * r * r / a_w3_norm).max(0.0) } else { 0.0 };
    Ok(GardingReport { min_quadform: lam, a_w3_norm, c_measured, bound: -c_measured * a_w3_norm / (r * r) })
}

// ---------------------------------------------------------------------------
// Reality and adjoint identities.

#[derive(Clone, Debug, serde::Serialize)]
pub struct AdjointDiagnostics {
    /// `max |Ā - Op(conj a^∨)|`.
    pub conj_deviation: f64,
    /// `max |A* - Op(conj a)|`.
    pub adjoint_deviation: f64,
    /// `max |A - A*|`.
    pub self_adjoint_deviation: f64,
    /// `max |A + A*|`.
    pub skew_adjoint_deviation: f64,
}

pub fn reality_and_adjoint_checks(a: &SymbolGrid, k_max: usize) -> Result<AdjointDiagnostics, Error> {
    let op = quantize_bw(a, k_max)?;
    let conj_reflect = quantize_bw(&a.reflect_xi().conj(), k_max)?;
    let conj_sym = quantize_bw(&a.conj(), k_max)?;
    let adj = op.adjoint();
    Ok(AdjointDiagnostics {
        conj_deviation: linalg::max_abs_diff(&op.conj_op().matrix, &conj_reflect.matrix),
        adjoint_deviation: linalg::max_abs_diff(&adj.matrix, &conj_sym.matrix),
        self_adjoint_deviation: linalg::max_abs_diff(&op.matrix, &adj.matrix),
        skew_adjoint_deviation: linalg::max_abs(&(&op.matrix + &adj.matrix)),
    })
}

/// `⟨A u, u⟩` for a dense operator and a field on the same basis.
pub fn quadratic_form(a: &CMat, u: &[Complex64]) -> Complex64 {
    let mut acc = ZERO;
    for (r, ur) in u.iter().enumerate() {
        let row: Complex64 = a.row(r).iter().zip(u).map(|(x, y)| x * y).sum();
        acc += row * ur.conj();
    }
    acc
}

/// `⟨k⟩` helper reused by weighted norms.
pub fn weight(k: i64) -> f64 {
    japanese(k as f64)
}
