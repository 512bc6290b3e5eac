//! Truncated Fourier fields on the torus.
//!
//! A [`FourierField`] stores the coefficients `u_k` for `k ∈ [-K, K]` of
//! `u(x) = Σ u_k e^{ikx}`. Everything downstream (symbols, operators, flows,
//! time stepping) works on this basis.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use num_complex::Complex64;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::Error;

pub const ZERO: Complex64 = Complex64::new(0.0, 0.0);
pub const I: Complex64 = Complex64::new(0.0, 1.0);

/// `⟨k⟩ = max(1, |k|)`.
#[inline]
pub fn japanese(k: f64) -> f64 {
    k.abs().max(1.0)
}

/// `|k|^α`, with `|0|^α = 0`.
#[inline]
pub fn abs_pow(k: f64, alpha: f64) -> f64 {
    if k == 0.0 {
        0.0
    } else {
        k.abs().powf(alpha)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FourierField {
    k_max: usize,
    coeffs: Vec<Complex64>,
}

impl FourierField {
    pub fn zeros(k_max: usize) -> Self {
        Self { k_max, coeffs: vec![ZERO; 2 * k_max + 1] }
    }

    pub fn from_modes(k_max: usize, modes: &[(i64, Complex64)]) -> Self {
        let mut u = Self::zeros(k_max);
        for &(k, c) in modes {
            u.add(k, c);
        }
        u
    }

    /// Builds a field from a dense coefficient vector ordered `k = -K..=K`.
    pub fn from_vec(coeffs: Vec<Complex64>) -> Result<Self, Error> {
        if coeffs.len().is_multiple_of(2) {
            return Err(Error::Invalid(format!("coefficient vector must have odd length 2K+1, got {}", coeffs.len())));
        }
        Ok(Self { k_max: (coeffs.len() - 1) / 2, coeffs })
    }

    /// Random field with coefficients decaying like `⟨k⟩^{-decay}`, rescaled to
    /// `‖u‖_{s} = norm`.
    pub fn random(k_max: usize, seed: u64, decay: f64, s: f64, norm: f64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut u = Self::zeros(k_max);
        for k in -(k_max as i64)..=(k_max as i64) {
            let w = japanese(k as f64).powf(-decay);
            let c = Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            u.set(k, c * w);
        }
        let n = u.sobolev_norm(s);
        if n > 0.0 {
            u.scale_mut(norm / n);
        }
        u
    }

    #[inline]
    pub fn k_max(&self) -> usize {
        self.k_max
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        false
    }

    #[inline]
    pub fn index(&self, k: i64) -> Option<usize> {
        let km = self.k_max as i64;
        if k < -km || k > km {
            None
        } else {
            Some((k + km) as usize)
        }
    }

    /// Coefficient `u_k`; zero outside the truncation.
    #[inline]
    pub fn get(&self, k: i64) -> Complex64 {
        self.index(k).map_or(ZERO, |i| self.coeffs[i])
    }

    /// Sets `u_k`. Panics when `k` lies outside `[-K, K]`.
    #[inline]
    pub fn set(&mut self, k: i64, c: Complex64) {
        let i = self.index(k).expect("mode outside truncation");
        self.coeffs[i] = c;
    }

    #[inline]
    pub fn add(&mut self, k: i64, c: Complex64) {
        let i = self.index(k).expect("mode outside truncation");
        self.coeffs[i] += c;
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [Complex64] {
        &mut self.coeffs
    }

    pub fn into_vec(self) -> Vec<Complex64> {
        self.coeffs
    }

    pub fn modes(&self) -> impl Iterator<Item = (i64, Complex64)> + '_ {
        let km = self.k_max as i64;
        self.coeffs.iter().enumerate().map(move |(i, &c)| (i as i64 - km, c))
    }

    /// Same function on a different truncation radius (zero-padded or cut).
    pub fn resized(&self, k_new: usize) -> Self {
        let mut out = Self::zeros(k_new);
        let kk = self.k_max.min(k_new) as i64;
        for k in -kk..=kk {
            out.set(k, self.get(k));
        }
        out
    }

    /// The field `ū`, whose coefficients are `(ū)_k = conj(u_{-k})`.
    pub fn conj_field(&self) -> Self {
        let mut out = Self::zeros(self.k_max);
        for (k, c) in self.modes() {
            out.set(-k, c.conj());
        }
        out
    }

    pub fn scale(&self, a: f64) -> Self {
        let mut out = self.clone();
        out.scale_mut(a);
        out
    }

    pub fn scale_mut(&mut self, a: f64) {
        for c in &mut self.coeffs {
            *c *= a;
        }
    }

    pub fn scale_c(&self, a: Complex64) -> Self {
        Self { k_max: self.k_max, coeffs: self.coeffs.iter().map(|c| c * a).collect() }
    }

    pub fn axpy(&mut self, a: Complex64, other: &FourierField) {
        assert_eq!(self.k_max, other.k_max);
        for (x, y) in self.coeffs.iter_mut().zip(&other.coeffs) {
            *x += a * y;
        }
    }

    pub fn add_field(&self, other: &FourierField) -> Self {
        let mut out = self.clone();
        out.axpy(Complex64::new(1.0, 0.0), other);
        out
    }

    pub fn sub_field(&self, other: &FourierField) -> Self {
        let mut out = self.clone();
        out.axpy(Complex64::new(-1.0, 0.0), other);
        out
    }

    /// Applies the Fourier multiplier `k ↦ m(k)`.
    pub fn multiplier(&self, m: impl Fn(i64) -> Complex64) -> Self {
        let km = self.k_max as i64;
        let coeffs = self.coeffs.iter().enumerate().map(|(i, c)| c * m(i as i64 - km)).collect();
        Self { k_max: self.k_max, coeffs }
    }

    /// `∂_x u`.
    pub fn dx(&self) -> Self {
        self.multiplier(|k| Complex64::new(0.0, k as f64))
    }

    /// `|D|^α u`.
    pub fn frac_d(&self, alpha: f64) -> Self {
        self.multiplier(|k| Complex64::new(abs_pow(k as f64, alpha), 0.0))
    }

    /// `⟨u, v⟩ = Σ u_k conj(v_k)`.
    pub fn inner(&self, other: &FourierField) -> Complex64 {
        assert_eq!(self.k_max, other.k_max);
        self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| a * b.conj()).sum()
    }

    pub fn sobolev_norm(&self, s: f64) -> f64 {
        sobolev_norm(self, s)
    }

    pub fn max_abs_diff(&self, other: &FourierField) -> f64 {
        let k = self.k_max.max(other.k_max) as i64;
        (-k..=k).map(|j| (self.get(j) - other.get(j)).norm()).fold(0.0, f64::max)
    }

    /// Samples `u(x_m)` at `x_m = 2πm/n`. Requires `n ≥ 2K+1`.
    pub fn to_grid(&self, n: usize) -> Vec<Complex64> {
        assert!(n > 2 * self.k_max, "grid of {n} points cannot hold K = {}", self.k_max);
        let mut buf = vec![ZERO; n];
        for (k, c) in self.modes() {
            buf[k.rem_euclid(n as i64) as usize] = c;
        }
        fft_plan(n, true).process(&mut buf);
        buf
    }

    /// Inverse of [`FourierField::to_grid`], keeping modes `|k| ≤ k_max`.
    pub fn from_grid(values: &[Complex64], k_max: usize) -> Self {
        let n = values.len();
        assert!(n > 2 * k_max);
        let mut buf = values.to_vec();
        fft_plan(n, false).process(&mut buf);
        let inv = 1.0 / n as f64;
        let mut out = Self::zeros(k_max);
        for k in -(k_max as i64)..=(k_max as i64) {
            out.set(k, buf[k.rem_euclid(n as i64) as usize] * inv);
        }
        out
    }

    pub fn to_json(&self) -> String {
        let triples: Vec<(i64, f64, f64)> =
            self.modes().filter(|(_, c)| *c != ZERO).map(|(k, c)| (k, c.re, c.im)).collect();
        serde_json::to_string(&FieldFile { k_max: self.k_max, modes: triples }).expect("serializable")
    }

    pub fn from_json(text: &str) -> Result<Self, Error> {
        let f: FieldFile = serde_json::from_str(text).map_err(|e| Error::Invalid(e.to_string()))?;
        let mut u = Self::zeros(f.k_max);
        for (k, re, im) in f.modes {
            if u.index(k).is_none() {
                return Err(Error::Invalid(format!("mode {k} outside K = {}", f.k_max)));
            }
            u.set(k, Complex64::new(re, im));
        }
        Ok(u)
    }
}

#[derive(Serialize, Deserialize)]
struct FieldFile {
    #[serde(rename = "K")]
    k_max: usize,
    modes: Vec<(i64, f64, f64)>,
}

/// `sqrt(Σ ⟨k⟩^{2s} |u_k|²)`.
pub fn sobolev_norm(u: &FourierField, s: f64) -> f64 {
    u.modes().map(|(k, c)| japanese(k as f64).powf(2.0 * s) * c.norm_sqr()).sum::<f64>().sqrt()
}

pub fn mass(u: &FourierField) -> f64 {
    u.coeffs.iter().map(|c| c.norm_sqr()).sum()
}

pub fn momentum(u: &FourierField) -> f64 {
    -u.modes().map(|(k, c)| k as f64 * c.norm_sqr()).sum::<f64>()
}

/// Partition into the modes `Λ = {-1, 1}` and the rest.
#[derive(Clone, Debug, PartialEq)]
pub struct ModeSplit {
    pub tangential: FourierField,
    pub normal: FourierField,
}

#[inline]
pub fn in_lambda(k: i64) -> bool {
    k == 1 || k == -1
}

pub fn split_modes(z: &FourierField) -> ModeSplit {
    let mut tangential = FourierField::zeros(z.k_max);
    let mut normal = z.clone();
    for k in [-1i64, 1] {
        if let Some(i) = z.index(k) {
            tangential.coeffs[i] = z.coeffs[i];
            normal.coeffs[i] = ZERO;
        }
    }
    ModeSplit { tangential, normal }
}

/// `u(x) ↦ u(x + ς)`: multiplies `u_k` by `e^{ikς}`.
pub fn translate(u: &FourierField, shift: f64) -> FourierField {
    u.multiplier(|k| Complex64::from_polar(1.0, k as f64 * shift))
}

/// `u ↦ e^{iθ} u`.
pub fn gauge(u: &FourierField, theta: f64) -> FourierField {
    u.scale_c(Complex64::from_polar(1.0, theta))
}

type PlanCache = (FftPlanner<f64>, HashMap<(usize, bool), Arc<dyn Fft<f64>>>);

/// Cached FFT plans. `inverse = true` computes `Σ c_k e^{+ikx}`.
pub fn fft_plan(n: usize, inverse: bool) -> Arc<dyn Fft<f64>> {
    static PLANS: OnceLock<Mutex<PlanCache>> = OnceLock::new();
    let lock = PLANS.get_or_init(|| Mutex::new((FftPlanner::new(), HashMap::new())));
    let mut guard = lock.lock().expect("fft planner poisoned");
    let (planner, cache) = &mut *guard;
    cache
        .entry((n, inverse))
        .or_insert_with(|| if inverse { planner.plan_fft_inverse(n) } else { planner.plan_fft_forward(n) })
        .clone()
}

/// Smallest power of two that is `≥ n`.
pub fn grid_size(n: usize) -> usize {
    n.next_power_of_two()
}
