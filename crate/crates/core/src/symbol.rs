//! Symbols `a(x, ξ)` sampled on `x_m = 2πm/M` times the half-integer lattice
//! `ξ ∈ {-Ξ, -Ξ+½, ..., Ξ}`, plus the cutoffs and every explicit symbol used by
//! the normal form and the commutator argument.

use std::f64::consts::PI;
use std::io::Write;

use ndarray::Array2;
use num_complex::Complex64;

use crate::fourier::{abs_pow, fft_plan, grid_size, japanese, FourierField, I, ZERO};
use crate::Error;

/// Cutoff radius used throughout.
pub const DELTA0: f64 = 0.1;

/// Extra half-integer rows kept beyond `Ξ = K` so that finite differences in
/// `ξ` are centred on every row used by quantization.
pub const XI_MARGIN: usize = 4;

/// Smooth step: 0 for `y ≤ 1`, 1 for `y ≥ 2`, exponential blend in between.
pub fn eta(y: f64) -> f64 {
    if y <= 1.0 {
        0.0
    } else if y >= 2.0 {
        1.0
    } else {
        let e = 1.0 / (y - 1.0) - 1.0 / (2.0 - y);
        if e > 700.0 {
            0.0
        } else if e < -700.0 {
            1.0
        } else {
            1.0 / (1.0 + e.exp())
        }
    }
}

/// Derivative of [`eta`].
pub fn eta_prime(y: f64) -> f64 {
    if y <= 1.0 || y >= 2.0 {
        return 0.0;
    }
    let a = 1.0 / (y - 1.0);
    let b = 1.0 / (2.0 - y);
    let e = a - b;
    if e.abs() > 700.0 {
        return 0.0;
    }
    let r = e.exp();
    r / ((1.0 + r) * (1.0 + r)) * (a * a + b * b)
}

/// `η_R(ξ) = η(ξ/R)`.
pub fn eta_r(xi: f64, r: f64) -> f64 {
    eta(xi / r)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CutoffFamily {
    pub delta0: f64,
}

impl Default for CutoffFamily {
    fn default() -> Self {
        Self { delta0: DELTA0 }
    }
}

impl CutoffFamily {
    pub fn new(delta0: f64) -> Result<Self, Error> {
        if !(delta0 > 0.0 && delta0 <= 0.1) {
            return Err(Error::Invalid(format!("δ0 = {delta0} must lie in (0, 1/10]")));
        }
        Ok(Self { delta0 })
    }

    /// `χ(ξ', ξ) = 1 - η(2|ξ'|/(δ0⟨ξ⟩))`.
    pub fn chi(&self, xi_p: f64, xi: f64) -> f64 {
        1.0 - eta(2.0 * xi_p.abs() / (self.delta0 * japanese(xi)))
    }

    /// `χ_p` evaluated through the max norm of `ξ'`.
    pub fn chi_p(&self, xi_p: &[f64], xi: f64) -> f64 {
        let m = xi_p.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
        self.chi(m, xi)
    }
}

/// Sampled symbol. Row `h` holds `ξ = -Ξ + h/2`.
#[derive(Clone, Debug)]
pub struct SymbolGrid {
    nx: usize,
    xi_max: usize,
    pub order: f64,
    values: Array2<Complex64>,
}

/// Default resolution `(M, Ξ)` for the truncation radius `K`.
pub fn resolution(k_max: usize) -> (usize, usize) {
    (grid_size(4 * k_max + 4), k_max + XI_MARGIN)
}

impl SymbolGrid {
    pub fn zeros(nx: usize, xi_max: usize, order: f64) -> Self {
        Self { nx, xi_max, order, values: Array2::from_elem((4 * xi_max + 1, nx), ZERO) }
    }

    pub fn for_truncation(k_max: usize, order: f64) -> Self {
        let (nx, xi_max) = resolution(k_max);
        Self::zeros(nx, xi_max, order)
    }

    pub fn from_fn(nx: usize, xi_max: usize, order: f64, f: impl Fn(f64, f64) -> Complex64) -> Self {
        let mut g = Self::zeros(nx, xi_max, order);
        for h in 0..g.n_xi() {
            let xi = g.xi(h);
            for m in 0..nx {
                g.values[[h, m]] = f(g.x(m), xi);
            }
        }
        g
    }

    /// `a(x, ξ) = f(x)·w(ξ)` with `f` given by its Fourier coefficients.
    pub fn from_x_function(
        nx: usize,
        xi_max: usize,
        order: f64,
        f: &FourierField,
        w: impl Fn(f64) -> Complex64,
    ) -> Self {
        let fx = f.to_grid(nx);
        Self::from_x_values(nx, xi_max, order, &fx, w)
    }

    pub fn from_x_values(nx: usize, xi_max: usize, order: f64, fx: &[Complex64], w: impl Fn(f64) -> Complex64) -> Self {
        let mut g = Self::zeros(nx, xi_max, order);
        for h in 0..g.n_xi() {
            let wx = w(g.xi(h));
            for m in 0..nx {
                g.values[[h, m]] = fx[m] * wx;
            }
        }
        g
    }

    /// Builds a symbol from spatial Fourier coefficients per row:
    /// `hat[h][m + mmax]` is the coefficient of `e^{imx}` at `ξ_h`.
    pub fn from_spectral(nx: usize, xi_max: usize, order: f64, mmax: usize, hat: &Array2<Complex64>) -> Self {
        assert!(nx > 2 * mmax, "grid too coarse for spectral content");
        let mut g = Self::zeros(nx, xi_max, order);
        let plan = fft_plan(nx, true);
        let mut buf = vec![ZERO; nx];
        for h in 0..g.n_xi() {
            buf.iter_mut().for_each(|z| *z = ZERO);
            for (i, c) in hat.row(h).iter().enumerate() {
                let m = i as i64 - mmax as i64;
                buf[m.rem_euclid(nx as i64) as usize] = *c;
            }
            plan.process(&mut buf);
            for m in 0..nx {
                g.values[[h, m]] = buf[m];
            }
        }
        g
    }

    #[inline]
    pub fn nx(&self) -> usize {
        self.nx
    }

    #[inline]
    pub fn xi_max(&self) -> usize {
        self.xi_max
    }

    #[inline]
    pub fn n_xi(&self) -> usize {
        4 * self.xi_max + 1
    }

    #[inline]
    pub fn x(&self, m: usize) -> f64 {
        2.0 * PI * m as f64 / self.nx as f64
    }

    #[inline]
    pub fn xi(&self, h: usize) -> f64 {
        -(self.xi_max as f64) + 0.5 * h as f64
    }

    /// Row index of `ξ = xi2/2`.
    #[inline]
    pub fn row_of(&self, xi2: i64) -> Option<usize> {
        let h = xi2 + 2 * self.xi_max as i64;
        if h < 0 || h as usize >= self.n_xi() {
            None
        } else {
            Some(h as usize)
        }
    }

    pub fn values(&self) -> &Array2<Complex64> {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut Array2<Complex64> {
        &mut self.values
    }

    #[inline]
    pub fn at(&self, h: usize, m: usize) -> Complex64 {
        self.values[[h, m]]
    }

    pub fn same_lattice(&self, other: &SymbolGrid) -> bool {
        self.nx == other.nx && self.xi_max == other.xi_max
    }

    fn check_lattice(&self, other: &SymbolGrid) {
        assert!(self.same_lattice(other), "symbols live on different lattices");
    }

    /// Spatial Fourier coefficients of row `h`, indexed `m mod M`.
    pub fn spectral_row(&self, h: usize) -> Vec<Complex64> {
        let mut buf: Vec<Complex64> = self.values.row(h).to_vec();
        fft_plan(self.nx, false).process(&mut buf);
        let inv = 1.0 / self.nx as f64;
        buf.iter_mut().for_each(|z| *z *= inv);
        buf
    }

    pub fn map(&self, f: impl Fn(Complex64) -> Complex64) -> Self {
        Self { nx: self.nx, xi_max: self.xi_max, order: self.order, values: self.values.mapv(f) }
    }

    pub fn scale(&self, c: Complex64) -> Self {
        self.map(|z| z * c)
    }

    pub fn add(&self, other: &SymbolGrid) -> Self {
        self.check_lattice(other);
        Self {
            nx: self.nx,
            xi_max: self.xi_max,
            order: self.order.max(other.order),
            values: &self.values + &other.values,
        }
    }

    pub fn sub(&self, other: &SymbolGrid) -> Self {
        self.add(&other.scale(Complex64::new(-1.0, 0.0)))
    }

    /// Pointwise product; orders add.
    pub fn mul(&self, other: &SymbolGrid) -> Self {
        self.check_lattice(other);
        Self { nx: self.nx, xi_max: self.xi_max, order: self.order + other.order, values: &self.values * &other.values }
    }

    pub fn with_order(mut self, order: f64) -> Self {
        self.order = order;
        self
    }

    pub fn conj(&self) -> Self {
        self.map(|z| z.conj())
    }

    /// `a^∨(x, ξ) = a(x, -ξ)`.
    pub fn reflect_xi(&self) -> Self {
        let n = self.n_xi();
        let mut out = self.clone();
        for h in 0..n {
            out.values.row_mut(h).assign(&self.values.row(n - 1 - h));
        }
        out
    }

    /// `∂_x^k a` by spectral differentiation in `x`.
    pub fn dx(&self, k: u32) -> Self {
        if k == 0 {
            return self.clone();
        }
        self.x_multiplier(|m| (I * m as f64).powu(k))
    }

    /// `D_x^k a` with `D_x = (1/i)∂_x`.
    pub fn d_x(&self, k: u32) -> Self {
        if k == 0 {
            return self.clone();
        }
        self.x_multiplier(|m| Complex64::new((m as f64).powi(k as i32), 0.0))
    }

    fn x_multiplier(&self, mult: impl Fn(i64) -> Complex64) -> Self {
        let nx = self.nx as i64;
        let fwd = fft_plan(self.nx, false);
        let inv = fft_plan(self.nx, true);
        let mut out = self.clone();
        let mut buf = vec![ZERO; self.nx];
        let scale = 1.0 / self.nx as f64;
        for h in 0..self.n_xi() {
            buf.copy_from_slice(self.values.row(h).as_slice().expect("contiguous"));
            fwd.process(&mut buf);
            for (i, z) in buf.iter_mut().enumerate() {
                let mut m = i as i64;
                if m > nx / 2 {
                    m -= nx;
                }
                // The Nyquist mode has no symmetric partner; drop it.
                *z = if 2 * m == nx { ZERO } else { *z * mult(m) * scale };
            }
            inv.process(&mut buf);
            out.values.row_mut(h).iter_mut().zip(&buf).for_each(|(o, b)| *o = *b);
        }
        out
    }

    /// `∂_ξ^k a` by centred differences of step ½ on the lattice.
    pub fn dxi(&self, k: u32) -> Self {
        let mut out = self.clone();
        let mut remaining = k;
        while remaining >= 2 {
            out = out.second_difference();
            remaining -= 2;
        }
        if remaining == 1 {
            out = out.first_difference();
        }
        out.order = self.order - k as f64;
        out
    }

    fn first_difference(&self) -> Self {
        let n = self.n_xi();
        let mut out = self.clone();
        for m in 0..self.nx {
            let col = self.values.column(m);
            let d = xi_first_difference(
                col.as_slice_memory_order().map(|s| s.to_vec()).unwrap_or_else(|| col.to_vec()).as_slice(),
            );
            for h in 0..n {
                out.values[[h, m]] = d[h];
            }
        }
        out
    }

    fn second_difference(&self) -> Self {
        let n = self.n_xi();
        let mut out = self.clone();
        for m in 0..self.nx {
            let col = self.values.column(m).to_vec();
            let d = xi_second_difference(&col);
            for h in 0..n {
                out.values[[h, m]] = d[h];
            }
        }
        out
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn max_abs_diff(&self, other: &SymbolGrid) -> f64 {
        self.check_lattice(other);
        self.values.iter().zip(other.values.iter()).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max)
    }

    pub fn max_imag(&self) -> f64 {
        self.values.iter().map(|z| z.im.abs()).fold(0.0, f64::max)
    }

    /// Largest `|mean_x a(·, ξ)|` over the rows.
    pub fn max_row_mean(&self) -> f64 {
        (0..self.n_xi())
            .map(|h| (self.values.row(h).iter().sum::<Complex64>() / self.nx as f64).norm())
            .fold(0.0, f64::max)
    }

    /// `max_x |a(x, ξ_h)|` for each row.
    pub fn row_sup(&self) -> Vec<f64> {
        (0..self.n_xi()).map(|h| self.values.row(h).iter().map(|z| z.norm()).fold(0.0, f64::max)).collect()
    }

    /// Writes the CSV dump `x_index, xi_times_2, re, im`.
    pub fn write_csv(&self, mut w: impl Write) -> std::io::Result<()> {
        writeln!(w, "x_index,xi_times_2,re,im")?;
        for h in 0..self.n_xi() {
            let xi2 = h as i64 - 2 * self.xi_max as i64;
            for m in 0..self.nx {
                let z = self.values[[h, m]];
                writeln!(w, "{m},{xi2},{:.17e},{:.17e}", z.re, z.im)?;
            }
        }
        Ok(())
    }
}

/// Centred first difference of step ½, one-sided at the ends.
pub fn xi_first_difference(f: &[Complex64]) -> Vec<Complex64> {
    let n = f.len();
    let mut d = vec![ZERO; n];
    if n < 2 {
        return d;
    }
    for h in 1..n - 1 {
        d[h] = f[h + 1] - f[h - 1];
    }
    d[0] = (f[1] - f[0]) * 2.0;
    d[n - 1] = (f[n - 1] - f[n - 2]) * 2.0;
    d
}

/// Centred second difference of step ½; end rows copy their neighbours.
pub fn xi_second_difference(f: &[Complex64]) -> Vec<Complex64> {
    let n = f.len();
    let mut d = vec![ZERO; n];
    if n < 3 {
        return d;
    }
    for h in 1..n - 1 {
        d[h] = (f[h + 1] - f[h] * 2.0 + f[h - 1]) * 4.0;
    }
    d[0] = d[1];
    d[n - 1] = d[n - 2];
    d
}

/// `∂_ξ^k` of a profile sampled on the half-integer lattice.
pub fn xi_derivative(f: &[Complex64], k: u32) -> Vec<Complex64> {
    let mut out = f.to_vec();
    let mut r = k;
    while r >= 2 {
        out = xi_second_difference(&out);
        r -= 2;
    }
    if r == 1 {
        out = xi_first_difference(&out);
    }
    out
}

fn real_grid(g: SymbolGrid) -> SymbolGrid {
    g.map(|z| Complex64::new(z.re, 0.0))
}

// ---------------------------------------------------------------------------
// Explicit functions of x built from a field.

/// Coefficients of `underlineV = |u|² - M(u) = Σ_{k1≠k2} u_{k1} ū_{k2} e^{i(k1-k2)x}`.
pub fn underline_v_coeffs(u: &FourierField) -> FourierField {
    let km = u.k_max() as i64;
    let mut out = FourierField::zeros(2 * u.k_max());
    let nz: Vec<(i64, Complex64)> = u.modes().filter(|(_, c)| *c != ZERO).collect();
    for &(k1, a) in &nz {
        for &(k2, b) in &nz {
            if k1 != k2 {
                out.add(k1 - k2, a * b.conj());
            }
        }
    }
    debug_assert!(km >= 0);
    out
}

/// Coefficients of `underlined = Im(u_x ū) - P(u)`.
pub fn underline_d_coeffs(u: &FourierField) -> FourierField {
    // Im Σ_{k1≠k2} i k1 u_{k1} ū_{k2} e^{i(k1-k2)x}; the imaginary part of a
    // function with coefficients c_m has coefficients (c_m - conj(c_{-m}))/(2i).
    let mut c = FourierField::zeros(2 * u.k_max());
    let nz: Vec<(i64, Complex64)> = u.modes().filter(|(_, c)| *c != ZERO).collect();
    for &(k1, a) in &nz {
        for &(k2, b) in &nz {
            if k1 != k2 {
                c.add(k1 - k2, I * k1 as f64 * a * b.conj());
            }
        }
    }
    imag_part_coeffs(&c)
}

/// Coefficients of `b = u u_x = Σ i(k1+k2)/2 u_{k1} u_{k2} e^{i(k1+k2)x}`.
pub fn b_coeffs(u: &FourierField) -> FourierField {
    let mut out = FourierField::zeros(2 * u.k_max());
    let nz: Vec<(i64, Complex64)> = u.modes().filter(|(_, c)| *c != ZERO).collect();
    for &(k1, a) in &nz {
        for &(k2, b) in &nz {
            out.add(k1 + k2, I * (0.5 * (k1 + k2) as f64) * a * b);
        }
    }
    out
}

/// Coefficients of `⟨V⟩ = 2 Re Σ_{n≥1} z_n conj(z_{-n}) e^{i2nx}`.
pub fn res_v_coeffs(z: &FourierField) -> FourierField {
    let km = z.k_max() as i64;
    let mut out = FourierField::zeros(2 * z.k_max());
    for n in 1..=km {
        let c = z.get(n) * z.get(-n).conj();
        out.add(2 * n, c);
        out.add(-2 * n, c.conj());
    }
    out
}

/// Coefficients of the polarised `β₂`:
/// `β₂(W, U) = ½ Σ_{|j1|≠|j2|} (w_{j1} ū_{j2} + u_{j1} w̄_{j2}) e^{i(j1-j2)x} / (i(|j1|^α - |j2|^α))`.
pub fn beta2_bilinear_coeffs(w: &FourierField, u: &FourierField, alpha: f64) -> FourierField {
    assert_eq!(w.k_max(), u.k_max());
    let km = u.k_max() as i64;
    let mut out = FourierField::zeros(2 * u.k_max());
    for j1 in -km..=km {
        let (w1, u1) = (w.get(j1), u.get(j1));
        if w1 == ZERO && u1 == ZERO {
            continue;
        }
        let a1 = abs_pow(j1 as f64, alpha);
        for j2 in -km..=km {
            if j1.abs() == j2.abs() {
                continue;
            }
            let num = (w1 * u.get(j2).conj() + u1 * w.get(j2).conj()) * 0.5;
            if num == ZERO {
                continue;
            }
            let den = I * (a1 - abs_pow(j2 as f64, alpha));
            out.add(j1 - j2, num / den);
        }
    }
    out
}

pub fn beta2_coeffs(u: &FourierField, alpha: f64) -> FourierField {
    beta2_bilinear_coeffs(u, u, alpha)
}

/// Coefficients of `Im f` from those of `f`.
pub fn imag_part_coeffs(c: &FourierField) -> FourierField {
    let mut out = FourierField::zeros(c.k_max());
    for (m, v) in c.modes() {
        out.set(m, (v - c.get(-m).conj()) / (2.0 * I));
    }
    out
}

/// Coefficients of `𝔱(x) = -Im(z1 conj(zm1) e^{i2x})`.
pub fn t_coeffs(z1: Complex64, zm1: Complex64) -> FourierField {
    let w = z1 * zm1.conj();
    FourierField::from_modes(2, &[(2, I * w * 0.5), (-2, -I * w.conj() * 0.5)])
}

/// Coefficients of `𝔳(x) = 2 Re(z1 conj(zm1) e^{i2x})`.
pub fn fv_coeffs(z1: Complex64, zm1: Complex64) -> FourierField {
    let w = z1 * zm1.conj();
    FourierField::from_modes(2, &[(2, w), (-2, w.conj())])
}

// ---------------------------------------------------------------------------
// Symbol constructors.

pub fn sym_underline_v(u: &FourierField, nx: usize, xi_max: usize) -> SymbolGrid {
    real_grid(SymbolGrid::from_x_function(nx, xi_max, 0.0, &underline_v_coeffs(u), |_| Complex64::new(1.0, 0.0)))
}

pub fn sym_underline_d(u: &FourierField, nx: usize, xi_max: usize) -> SymbolGrid {
    real_grid(SymbolGrid::from_x_function(nx, xi_max, 0.0, &underline_d_coeffs(u), |_| Complex64::new(1.0, 0.0)))
}

pub fn sym_b(u: &FourierField, nx: usize, xi_max: usize) -> SymbolGrid {
    SymbolGrid::from_x_function(nx, xi_max, 0.0, &b_coeffs(u), |_| Complex64::new(1.0, 0.0))
}

pub fn sym_res_v(z: &FourierField, nx: usize, xi_max: usize) -> SymbolGrid {
    real_grid(SymbolGrid::from_x_function(nx, xi_max, 0.0, &res_v_coeffs(z), |_| Complex64::new(1.0, 0.0)))
}

pub fn sym_beta2(u: &FourierField, alpha: f64, nx: usize, xi_max: usize) -> SymbolGrid {
    real_grid(SymbolGrid::from_x_function(nx, xi_max, 0.0, &beta2_coeffs(u, alpha), |_| Complex64::new(1.0, 0.0)))
}

/// Output of the out-diagonal homological iteration.
#[derive(Clone, Debug)]
pub struct G2Symbols {
    /// `g₂ = g^{(1)} + ... + g^{(p)}`.
    pub g2: SymbolGrid,
    /// `𝚏[g₂] = 2 g₂(Ω(D)U, U)`.
    pub f_g2: SymbolGrid,
    /// `r₂ = i𝚛[g^{(p)}] - i𝚏[g^{(p)}]`.
    pub residual: SymbolGrid,
    pub p: usize,
    /// Expansion order used in `#_ρ`.
    pub expansion_order: u32,
}

/// Solves the out-diagonal homological equation by the iteration
/// `g^{(1)} = -b/(2i|ξ|^α)`, `g^{(ℓ)} = -(i𝚛[g^{(ℓ-1)}] - i𝚏[g^{(ℓ-1)}])/(2i|ξ|^α)`.
///
/// Every `g^{(ℓ)}` has the form `Σ g_{j1 j2}(ξ) u_{j1} u_{j2} e^{i(j1+j2)x}`; the
/// coefficients are propagated pair by pair, so `𝚏` (which needs the bilinear
/// structure) is exact. `𝚛[g]` only involves `ξ`-derivatives of `|ξ|^α`, which
/// are taken by finite differences on the lattice. At `ξ = 0` the symbol is 0.
pub fn sym_g2(u: &FourierField, alpha: f64, rho: f64, nx: usize, xi_max: usize) -> Result<G2Symbols, Error> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::Invalid(format!("α = {alpha} must lie in (0,1)")));
    }
    if !(rho > 0.0) {
        return Err(Error::Invalid(format!("ρ = {rho} must be positive")));
    }
    let p = (rho / alpha).ceil().max(1.0) as usize;
    let order = rho.floor() as u32;
    let mmax = 2 * u.k_max();
    if nx <= 2 * mmax {
        return Err(Error::Invalid(format!("x-grid of {nx} points cannot resolve frequency {mmax}")));
    }
    let n_xi = 4 * xi_max + 1;
    let xi_of = |h: usize| -(xi_max as f64) + 0.5 * h as f64;
    let w: Vec<Complex64> = (0..n_xi).map(|h| Complex64::new(abs_pow(xi_of(h), alpha), 0.0)).collect();
    // ∂_ξ^k |ξ|^α for even k ≤ order.
    let derivs: Vec<(u32, Vec<f64>)> =
        (2..=order).step_by(2).map(|k| (k, xi_derivative(&w, k).iter().map(|z| z.re).collect())).collect();
    let rfac = |m: i64, h: usize| -> f64 {
        derivs.iter().map(|(k, d)| 2f64.powi(1 - *k as i32) / factorial(*k) * (m as f64).powi(*k as i32) * d[h]).sum()
    };

    let mut g_hat = Array2::from_elem((n_xi, 2 * mmax + 1), ZERO);
    let mut f_hat = g_hat.clone();
    let mut r_hat = g_hat.clone();
    let nz: Vec<(i64, Complex64)> = u.modes().filter(|(_, c)| *c != ZERO).collect();
    let mut factors = vec![0.0; n_xi];
    for &(j1, a) in &nz {
        for &(j2, b) in &nz {
            let m = j1 + j2;
            if m == 0 {
                // b has no zero-frequency part: i(j1+j2)/2 = 0.
                continue;
            }
            let c = a * b;
            let s_sum = abs_pow(j1 as f64, alpha) + abs_pow(j2 as f64, alpha);
            let col = (m + mmax as i64) as usize;
            for h in 0..n_xi {
                let wx = w[h].re;
                if wx == 0.0 {
                    factors[h] = 0.0;
                    continue;
                }
                factors[h] = -(rfac(m, h) - s_sum) / (2.0 * wx);
            }
            for h in 0..n_xi {
                let wx = w[h].re;
                if wx == 0.0 {
                    continue;
                }
                let mut term = -(m as f64) / (4.0 * wx);
                let mut total = term;
                for _ in 1..p {
                    term *= factors[h];
                    total += term;
                }
                g_hat[[h, col]] += c * total;
                f_hat[[h, col]] += c * (total * s_sum);
                r_hat[[h, col]] += c * I * ((rfac(m, h) - s_sum) * term);
            }
        }
    }
    let g2 = SymbolGrid::from_spectral(nx, xi_max, -alpha, mmax, &g_hat);
    let f_g2 = SymbolGrid::from_spectral(nx, xi_max, -alpha, mmax, &f_hat);
    let residual = SymbolGrid::from_spectral(nx, xi_max, -(p as f64) * alpha, mmax, &r_hat);
    Ok(G2Symbols { g2, f_g2, residual, p, expansion_order: order })
}

fn factorial(k: u32) -> f64 {
    (1..=k).map(|i| i as f64).product()
}

/// `J1 = (|z1|²+|zm1|²)/2`, `I1 = 2|z1||zm1|(2|z1||zm1| - J1)`.
pub fn constants_j1_i1(z1: Complex64, zm1: Complex64) -> (f64, f64) {
    let j1 = 0.5 * (z1.norm_sqr() + zm1.norm_sqr());
    let p = z1.norm() * zm1.norm();
    (j1, 2.0 * p * (2.0 * p - j1))
}

/// `𝔞(x, ξ) = 𝔱(x) |ξ|^{2s} η_R(ξ)²`.
pub fn sym_fa(s: f64, r: f64, z1: Complex64, zm1: Complex64, nx: usize, xi_max: usize) -> SymbolGrid {
    let t = t_coeffs(z1, zm1);
    let g = SymbolGrid::from_x_function(nx, xi_max, 2.0 * s, &t, |xi| {
        let e = eta_r(xi, r);
        Complex64::new(xi.abs().powf(2.0 * s) * e * e, 0.0)
    });
    real_grid(g)
}

/// `𝔳(x)` as a `ξ`-independent symbol.
pub fn sym_fv(z1: Complex64, zm1: Complex64, nx: usize, xi_max: usize) -> SymbolGrid {
    real_grid(SymbolGrid::from_x_function(nx, xi_max, 0.0, &fv_coeffs(z1, zm1), |_| Complex64::new(1.0, 0.0)))
}

/// `(J1 + 𝔳(x)) ξ`.
pub fn sym_transport(z1: Complex64, zm1: Complex64, nx: usize, xi_max: usize) -> SymbolGrid {
    let (j1, _) = constants_j1_i1(z1, zm1);
    let mut f = fv_coeffs(z1, zm1);
    f.add(0, Complex64::new(j1, 0.0));
    real_grid(SymbolGrid::from_x_function(nx, xi_max, 1.0, &f, |xi| Complex64::new(xi, 0.0)))
}

/// `|ξ|^{2s} η_R(ξ)²`.
pub fn sym_c(s: f64, r: f64, nx: usize, xi_max: usize) -> SymbolGrid {
    SymbolGrid::from_fn(nx, xi_max, 2.0 * s, |_, xi| {
        let e = eta_r(xi, r);
        Complex64::new(xi.abs().powf(2.0 * s) * e * e, 0.0)
    })
}

/// Fourier multiplier symbol `w(ξ)`.
pub fn sym_multiplier(nx: usize, xi_max: usize, order: f64, w: impl Fn(f64) -> Complex64) -> SymbolGrid {
    SymbolGrid::from_fn(nx, xi_max, order, |_, xi| w(xi))
}
