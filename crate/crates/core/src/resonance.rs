//! Four-wave index sets, their resonance classification relative to
//! `Λ = {-1, 1}`, the audit of the small-divisor lower bounds and exact
//! projections of cubic vector fields.

use std::cmp::Ordering;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::fourier::{abs_pow, in_lambda, FourierField, I, ZERO};
use crate::hiprec;
use crate::Error;

/// Floating-point threshold below which a non-structural frequency sum is
/// re-examined in high precision.
pub const FLOAT_RESONANCE_TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub struct IndexTuple {
    pub j: [i64; 4],
    pub sigma: [i8; 4],
}

impl IndexTuple {
    pub fn new(j: [i64; 4], sigma: [i8; 4]) -> Self {
        Self { j, sigma }
    }

    /// `σ⃗·j⃗ = 0`.
    pub fn momentum_ok(&self) -> bool {
        self.j.iter().zip(&self.sigma).map(|(j, s)| j * *s as i64).sum::<i64>() == 0
    }

    /// `σ⃗·1⃗ = 0`.
    pub fn gauge_ok(&self) -> bool {
        self.sigma.iter().map(|&s| s as i64).sum::<i64>() == 0
    }

    pub fn in_p4(&self) -> bool {
        self.momentum_ok() && self.gauge_ok()
    }

    pub fn n_outside(&self) -> u8 {
        self.j.iter().filter(|&&j| !in_lambda(j)).count() as u8
    }

    pub fn max_abs(&self) -> i64 {
        self.j.iter().map(|j| j.abs()).max().unwrap_or(0)
    }

    pub fn flipped(&self) -> Self {
        Self { j: self.j, sigma: self.sigma.map(|s| -s) }
    }

    /// The `+` indexes and the `-` indexes coincide as multisets. With the
    /// momentum constraint this is equivalent to the `|j|`-multisets agreeing,
    /// and it makes the frequency sum vanish for every `α`.
    pub fn is_structural(&self) -> bool {
        let mut plus: Vec<i64> = Vec::with_capacity(2);
        let mut minus: Vec<i64> = Vec::with_capacity(2);
        for (j, s) in self.j.iter().zip(&self.sigma) {
            if *s > 0 {
                plus.push(*j)
            } else {
                minus.push(*j)
            }
        }
        plus.sort_unstable();
        minus.sort_unstable();
        plus == minus
    }
}

/// `Σ_a σ_a |j_a|^α`.
pub fn omega_sum(t: &IndexTuple, alpha: f64) -> f64 {
    t.j.iter().zip(&t.sigma).map(|(&j, &s)| s as f64 * abs_pow(j as f64, alpha)).sum()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct ResonanceTag {
    pub n_outside: u8,
    pub resonant: bool,
}

/// Resonance with respect to `Λ = {±1}`: structural for `n ≤ 2`, and for
/// `n ≥ 3` a floating test at [`FLOAT_RESONANCE_TOL`] confirmed in high
/// precision.
pub fn classify(t: &IndexTuple, alpha: f64) -> ResonanceTag {
    let n_outside = t.n_outside();
    let resonant = t.is_structural()
        || (n_outside > 2
            && omega_sum(t, alpha).abs() <= FLOAT_RESONANCE_TOL
            && hiprec::is_zero(&hiprec::omega_sum(&t.j, &t.sigma, alpha)));
    ResonanceTag { n_outside, resonant }
}

/// The six sign patterns with two `+` and two `-`.
pub const SIGN_PATTERNS: [[i8; 4]; 6] =
    [[1, 1, -1, -1], [1, -1, 1, -1], [1, -1, -1, 1], [-1, 1, 1, -1], [-1, 1, -1, 1], [-1, -1, 1, 1]];

/// Tuples of `𝔓₄` with first index `j1` and `|j_a| ≤ J`.
pub fn for_each_p4_with_j1(j_max: i64, j1: i64, mut f: impl FnMut(IndexTuple)) {
    for sigma in SIGN_PATTERNS {
        for j2 in -j_max..=j_max {
            for j3 in -j_max..=j_max {
                let partial = sigma[0] as i64 * j1 + sigma[1] as i64 * j2 + sigma[2] as i64 * j3;
                let j4 = -(sigma[3] as i64) * partial;
                if j4.abs() <= j_max {
                    f(IndexTuple { j: [j1, j2, j3, j4], sigma });
                }
            }
        }
    }
}

/// Streams every tuple of `𝔓₄` with `|j_a| ≤ J` exactly once.
pub fn enumerate_p4(j_max: i64) -> impl Iterator<Item = IndexTuple> {
    SIGN_PATTERNS.into_iter().flat_map(move |sigma| {
        (-j_max..=j_max).flat_map(move |j1| {
            (-j_max..=j_max).flat_map(move |j2| {
                (-j_max..=j_max).filter_map(move |j3| {
                    let partial = sigma[0] as i64 * j1 + sigma[1] as i64 * j2 + sigma[2] as i64 * j3;
                    let j4 = -(sigma[3] as i64) * partial;
                    (j4.abs() <= j_max).then_some(IndexTuple { j: [j1, j2, j3, j4], sigma })
                })
            })
        })
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct Attained {
    pub value: f64,
    pub tuple: Option<IndexTuple>,
}

impl Attained {
    fn empty() -> Self {
        Self { value: f64::INFINITY, tuple: None }
    }

    fn offer(&mut self, value: f64, t: IndexTuple) {
        if value < self.value {
            self.value = value;
            self.tuple = Some(t);
        }
    }

    fn merge(mut self, other: Attained) -> Self {
        if other.value < self.value || (other.value == self.value && other.tuple < self.tuple) {
            self = other;
        }
        self
    }
}

impl PartialOrd for IndexTuple {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for IndexTuple {
    fn cmp(&self, other: &Self) -> Ordering {
        (self.j, self.sigma).cmp(&(other.j, other.sigma))
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct AuditReport {
    #[serde(rename = "J")]
    pub j_max: i64,
    pub alpha: f64,
    /// Tuple counts by number of indexes outside `Λ`.
    pub counts: [u64; 5],
    /// Structurally resonant tuples for `n = 0, 1, 2`.
    pub resonant_counts: [u64; 3],
    /// Tuples of `𝔓^{(1)}` whose float frequency sum is below tolerance.
    pub numeric_resonances_p1: u64,
    /// Non-structural tuples of `𝔓^{(2)}` whose float frequency sum is below
    /// tolerance.
    pub numeric_resonances_p2: u64,
    /// `min |Σσ|j|^α|` over `𝔓^{(1)}`.
    pub min_p1: Attained,
    /// `min |Σσ|j|^α| max|j|^{1-α}` over `𝔓^{(2)} \ 𝔕^{(2)}`.
    pub min_p2_weighted: Attained,
    /// `min |Σσ|j|^α|` over `𝔓^{(2)} \ 𝔕^{(2)}`.
    pub min_p2: Attained,
    /// The constant `2^α - 1` appearing in the lower bound for `𝔓^{(1)}`.
    pub proof_constant_p1: f64,
}

#[derive(Clone)]
struct Partial {
    counts: [u64; 5],
    resonant: [u64; 3],
    num_p1: u64,
    num_p2: u64,
    min_p1: Attained,
    min_p2w: Attained,
    min_p2: Attained,
}

impl Partial {
    fn new() -> Self {
        Self {
            counts: [0; 5],
            resonant: [0; 3],
            num_p1: 0,
            num_p2: 0,
            min_p1: Attained::empty(),
            min_p2w: Attained::empty(),
            min_p2: Attained::empty(),
        }
    }

    fn merge(mut self, o: Partial) -> Self {
        for i in 0..5 {
            self.counts[i] += o.counts[i];
        }
        for i in 0..3 {
            self.resonant[i] += o.resonant[i];
        }
        self.num_p1 += o.num_p1;
        self.num_p2 += o.num_p2;
        self.min_p1 = self.min_p1.merge(o.min_p1);
        self.min_p2w = self.min_p2w.merge(o.min_p2w);
        self.min_p2 = self.min_p2.merge(o.min_p2);
        self
    }
}

/// Exhaustive sweep over `𝔓₄` with `|j_a| ≤ J`, partitioned by `j1`.
pub fn audit_lower_bounds(j_max: i64, alpha: f64) -> Result<AuditReport, Error> {
    if j_max < 1 {
        return Err(Error::Invalid(format!("J = {j_max} must be ≥ 1")));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::Invalid(format!("α = {alpha} must lie in (0,1)")));
    }
    let off = j_max as usize;
    let pow: Vec<f64> = (-j_max..=j_max).map(|j| abs_pow(j as f64, alpha)).collect();
    let weight: Vec<f64> = (-j_max..=j_max).map(|j| (j.abs() as f64).powf(1.0 - alpha)).collect();
    let total = (-j_max..=j_max)
        .into_par_iter()
        .map(|j1| {
            let mut p = Partial::new();
            for_each_p4_with_j1(j_max, j1, |t| {
                let n = t.n_outside() as usize;
                p.counts[n] += 1;
                if n > 2 {
                    return;
                }
                let w: f64 = (0..4).map(|a| t.sigma[a] as f64 * pow[(t.j[a] + off as i64) as usize]).sum();
                let structural = t.is_structural();
                if structural {
                    p.resonant[n] += 1;
                }
                match n {
                    1 => {
                        if w.abs() <= FLOAT_RESONANCE_TOL {
                            p.num_p1 += 1;
                        }
                        p.min_p1.offer(w.abs(), t);
                    }
                    2 if !structural => {
                        if w.abs() <= FLOAT_RESONANCE_TOL {
                            p.num_p2 += 1;
                        }
                        let m = t.max_abs();
                        p.min_p2.offer(w.abs(), t);
                        p.min_p2w.offer(w.abs() * weight[(m + off as i64) as usize], t);
                    }
                    _ => {}
                }
            });
            p
        })
        .reduce(Partial::new, Partial::merge);
    Ok(AuditReport {
        j_max,
        alpha,
        counts: total.counts,
        resonant_counts: total.resonant,
        numeric_resonances_p1: total.num_p1,
        numeric_resonances_p2: total.num_p2,
        min_p1: total.min_p1,
        min_p2_weighted: total.min_p2w,
        min_p2: total.min_p2,
        proof_constant_p1: 2f64.powf(alpha) - 1.0,
    })
}

// ---------------------------------------------------------------------------
// Cubic vector fields.

/// Index of a cubic monomial `u^{s1}_{j1} u^{s2}_{j2} u^{s3}_{j3}` contributing
/// to the `e^{iσkx}` component of `X(U)^σ`. Constraint:
/// `((j1, j2, j3, k), (s1, s2, s3, -σ)) ∈ 𝔓₄`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct CubicKey {
    pub sigma: i8,
    pub k: i64,
    pub s: [i8; 3],
    pub j: [i64; 3],
}

impl CubicKey {
    pub fn new(j: [i64; 3], s: [i8; 3], k: i64, sigma: i8) -> Self {
        Self { sigma, k, s, j }
    }

    /// Input pairs sorted by `(s, j)`.
    pub fn canonical(&self) -> Self {
        let mut pairs = [(self.s[0], self.j[0]), (self.s[1], self.j[1]), (self.s[2], self.j[2])];
        pairs.sort_unstable();
        Self { sigma: self.sigma, k: self.k, s: pairs.map(|p| p.0), j: pairs.map(|p| p.1) }
    }

    pub fn tuple(&self) -> IndexTuple {
        IndexTuple {
            j: [self.j[0], self.j[1], self.j[2], self.k],
            sigma: [self.s[0], self.s[1], self.s[2], -self.sigma],
        }
    }

    /// Number of distinct orderings of the three input pairs.
    pub fn multiplicity(&self) -> usize {
        let c = self.canonical();
        let p = [(c.s[0], c.j[0]), (c.s[1], c.j[1]), (c.s[2], c.j[2])];
        if p[0] == p[1] && p[1] == p[2] {
            1
        } else if p[0] == p[1] || p[1] == p[2] {
            3
        } else {
            6
        }
    }

    /// Every ordering of the input pairs (with repetitions when pairs
    /// coincide).
    pub fn permutations(&self) -> [CubicKey; 6] {
        const P: [[usize; 3]; 6] = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];
        P.map(|p| CubicKey {
            sigma: self.sigma,
            k: self.k,
            s: [self.s[p[0]], self.s[p[1]], self.s[p[2]]],
            j: [self.j[p[0]], self.j[p[1]], self.j[p[2]]],
        })
    }
}

/// Canonical keys of all gauge- and momentum-admissible cubic monomials with
/// indexes bounded by `J`.
pub fn canonical_keys(j_max: i64) -> Vec<CubicKey> {
    let mut keys = Vec::new();
    for sigma in [1i8, -1] {
        // Inputs: two with sign σ and one with -σ.
        for jc in -j_max..=j_max {
            for ja in -j_max..=j_max {
                for jb in ja..=j_max {
                    // σk = σ ja + σ jb - σ jc.
                    let k = ja + jb - jc;
                    if k.abs() > j_max {
                        continue;
                    }
                    let key = CubicKey { sigma, k, s: [-sigma, sigma, sigma], j: [jc, ja, jb] };
                    keys.push(key.canonical());
                }
            }
        }
    }
    keys.sort_unstable();
    keys
}

/// Coefficients of a cubic, gauge and translation invariant vector field,
/// stored once per canonical key. Symmetry under permutations of the input
/// pairs holds by construction.
#[derive(Clone, Debug)]
pub struct CubicTable {
    pub j_max: i64,
    entries: Vec<(CubicKey, Complex64)>,
}

impl CubicTable {
    pub fn empty(j_max: i64) -> Self {
        Self { j_max, entries: Vec::new() }
    }

    /// Table with `f(key)` at every admissible canonical key; zeros dropped.
    pub fn from_fn(j_max: i64, f: impl Fn(&CubicKey) -> Complex64) -> Self {
        let entries = canonical_keys(j_max)
            .into_iter()
            .filter_map(|k| {
                let v = f(&k);
                (v != ZERO).then_some((k, v))
            })
            .collect();
        Self { j_max, entries }
    }

    /// Builds a table from entries given in arbitrary orderings. Rejects
    /// entries outside `𝔓₄`, and tables where two orderings of the same
    /// monomial carry different coefficients.
    pub fn from_entries(j_max: i64, entries: impl IntoIterator<Item = (CubicKey, Complex64)>) -> Result<Self, Error> {
        let mut all: Vec<(CubicKey, CubicKey, Complex64)> = Vec::new();
        for (key, v) in entries {
            if !key.tuple().in_p4() {
                return Err(Error::Invalid(format!("{key:?} violates the momentum or gauge constraint")));
            }
            all.push((key.canonical(), key, v));
        }
        all.sort_by_key(|a| (a.0, a.1));
        let mut out: Vec<(CubicKey, Complex64)> = Vec::new();
        let mut i = 0;
        while i < all.len() {
            let canon = all[i].0;
            let mut listed: Vec<(CubicKey, Complex64)> = Vec::new();
            while i < all.len() && all[i].0 == canon {
                listed.push((all[i].1, all[i].2));
                i += 1;
            }
            let v = listed[0].1;
            let tol = 1e-14 * v.norm().max(1e-300);
            for (_, w) in &listed {
                if (w - v).norm() > tol {
                    return Err(Error::Invalid(format!("coefficients of {canon:?} are not symmetric")));
                }
            }
            // A partially listed monomial with a nonzero value is asymmetric:
            // its missing orderings are implicitly zero.
            let mut distinct: Vec<CubicKey> = canon.permutations().to_vec();
            distinct.sort_unstable();
            distinct.dedup();
            let mut seen: Vec<CubicKey> = listed.iter().map(|p| p.0).collect();
            seen.sort_unstable();
            seen.dedup();
            if v != ZERO && seen.len() != distinct.len() {
                return Err(Error::Invalid(format!("coefficients of {canon:?} are not symmetric")));
            }
            if v != ZERO {
                out.push((canon, v));
            }
        }
        Ok(Self { j_max, entries: out })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &(CubicKey, Complex64)> {
        self.entries.iter()
    }

    pub fn get(&self, key: &CubicKey) -> Complex64 {
        let c = key.canonical();
        self.entries.binary_search_by(|(k, _)| k.cmp(&c)).map_or(ZERO, |i| self.entries[i].1)
    }

    /// `Π_A X`: drops every coefficient whose tuple is outside `A`.
    pub fn project(&self, keep: impl Fn(&IndexTuple) -> bool) -> Self {
        Self { j_max: self.j_max, entries: self.entries.iter().filter(|(k, _)| keep(&k.tuple())).cloned().collect() }
    }

    pub fn map(&self, f: impl Fn(&CubicKey, Complex64) -> Complex64) -> Self {
        Self {
            j_max: self.j_max,
            entries: self
                .entries
                .iter()
                .filter_map(|(k, v)| {
                    let w = f(k, *v);
                    (w != ZERO).then_some((*k, w))
                })
                .collect(),
        }
    }

    /// Largest coefficient difference over the union of supports.
    pub fn max_abs_diff(&self, other: &CubicTable) -> f64 {
        let a = self.entries.iter().map(|(k, v)| (*v - other.get(k)).norm());
        let b = other.entries.iter().map(|(k, v)| (*v - self.get(k)).norm());
        a.chain(b).fold(0.0, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.entries.iter().map(|(_, v)| v.norm()).fold(0.0, f64::max)
    }

    /// Whether `conj X^{s⃗,+} = X^{-s⃗,-}` holds to `tol`.
    pub fn reality_defect(&self) -> f64 {
        self.entries
            .iter()
            .map(|(k, v)| {
                let mirror = CubicKey { sigma: -k.sigma, k: k.k, s: k.s.map(|s| -s), j: k.j };
                (v.conj() - self.get(&mirror)).norm()
            })
            .fold(0.0, f64::max)
    }

    /// Evaluates `(X(U)^+, X(U)^-)`; the `k`-th coefficient of the second
    /// field multiplies `e^{-ikx}`.
    pub fn evaluate(&self, u: &FourierField) -> (FourierField, FourierField) {
        let km = u.k_max().max(self.j_max as usize);
        let mut plus = FourierField::zeros(km);
        let mut minus = FourierField::zeros(km);
        let val = |j: i64, s: i8| if s > 0 { u.get(j) } else { u.get(j).conj() };
        for (key, c) in &self.entries {
            let mono = val(key.j[0], key.s[0]) * val(key.j[1], key.s[1]) * val(key.j[2], key.s[2]);
            if mono == ZERO {
                continue;
            }
            let term = c * mono * key.multiplicity() as f64;
            if key.sigma > 0 {
                plus.add(key.k, term);
            } else {
                minus.add(key.k, term);
            }
        }
        (plus, minus)
    }
}

/// Coefficient of the renormalized cubic field
/// `X₃(U)^+ = |u|²u_x - M(u)u_x + iP(u)u` in symmetric form. Zero outside
/// `𝔓₄` and for sign patterns other than permutations of `(+,-,+)` (resp.
/// `(-,+,-)` for `σ = -`).
pub fn x3_coefficient(j: [i64; 3], k: i64, s: [i8; 3], sigma: i8) -> Complex64 {
    let key = CubicKey::new(j, s, k, sigma);
    if !key.tuple().in_p4() {
        return ZERO;
    }
    if sigma < 0 {
        return x3_coefficient(j, k, s.map(|x| -x), 1).conj();
    }
    let minus: Vec<usize> = (0..3).filter(|&a| s[a] < 0).collect();
    if minus.len() != 1 {
        return ZERO;
    }
    let p = minus[0];
    let (a, b) = match p {
        0 => (1, 2),
        1 => (0, 2),
        _ => (0, 1),
    };
    let (j1, j2, j3) = (j[a], j[p], j[b]);
    let d = |c: bool| if c { 1.0 } else { 0.0 };
    let v = j3 as f64 * d(j1 != j2) + j1 as f64 * d(j3 != j2) - j2 as f64 * (d(j1 == j2) + d(j3 == j2));
    I * (v / 6.0)
}

pub fn x3_table(j_max: i64) -> CubicTable {
    CubicTable::from_fn(j_max, |k| x3_coefficient(k.j, k.k, k.s, k.sigma))
}

/// `Π_{𝔕^{(n)}} X₃` in closed form: `-i|u₁|²u₁e^{ix} + i|u₋₁|²u₋₁e^{-ix}`
/// for `n = 0`, and zero for `n = 1, 2`.
pub fn proj_x3_closed_form(n: u8, j_max: i64) -> CubicTable {
    if n != 0 {
        return CubicTable::empty(j_max);
    }
    let third = 1.0 / 3.0;
    let entries = [
        (CubicKey::new([1, 1, 1], [1, -1, 1], 1, 1), -I * third),
        (CubicKey::new([-1, -1, -1], [1, -1, 1], -1, 1), I * third),
        (CubicKey::new([1, 1, 1], [-1, 1, -1], 1, -1), I * third),
        (CubicKey::new([-1, -1, -1], [-1, 1, -1], -1, -1), -I * third),
    ];
    let mut e: Vec<(CubicKey, Complex64)> = entries.iter().map(|(k, v)| (k.canonical(), *v)).collect();
    e.sort_by_key(|a| a.0);
    CubicTable { j_max, entries: e }
}

/// Membership in `𝔕^{(n)}_Λ`.
pub fn in_resonant_class(t: &IndexTuple, n: u8, alpha: f64) -> bool {
    let tag = classify(t, alpha);
    tag.n_outside == n && tag.resonant
}
