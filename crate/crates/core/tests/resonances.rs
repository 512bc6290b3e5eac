//! Four-wave enumeration, classification, lower-bound audit and cubic
//! projections against brute-force oracles.

use fracnls_core::fourier::{FourierField, I, ZERO};
use fracnls_core::hiprec;
use fracnls_core::resonance::*;
use num_bigint::BigInt;
use num_complex::Complex64;
use proptest::prelude::*;
use std::collections::HashSet;

const P: i8 = 1;
const M: i8 = -1;

#[test]
fn hiprec_roots_match_integer_roots() {
    // Oracle: floor(x^{1/n} 2^F) = integer n-th root of x 2^{nF}.
    let f = hiprec::FRAC_BITS;
    for (x, alpha, n) in [(2u64, 0.5, 2u32), (3, 0.5, 2), (300, 0.5, 2), (7, 0.25, 4), (1000, 0.75, 4)] {
        let ours = hiprec::pow_int(x, alpha);
        let power = (alpha * n as f64).round() as u32;
        let oracle = (BigInt::from(x).pow(power) << (f * n as u64)).nth_root(n);
        let err = (ours - oracle).magnitude().bits();
        assert!(err <= 16, "x = {x}, α = {alpha}: error of {err} bits");
    }
    assert_eq!(hiprec::pow_int(1, 0.5), BigInt::from(1) << f);
    assert!((hiprec::to_f64(&hiprec::pow_int(2, 0.5)) - 2f64.sqrt()).abs() < 1e-15);
}

#[test]
fn hiprec_separates_near_resonances() {
    // 2·√2 = √8 exactly, so this sum vanishes although no index pairs cancel.
    let z = hiprec::omega_sum(&[2, 2, 8, 0], &[1, 1, -1, -1], 0.5);
    assert!(hiprec::is_zero(&z));
    let nz = hiprec::omega_sum(&[2, 2, 9, 0], &[1, 1, -1, -1], 0.5);
    assert!(!hiprec::is_zero(&nz));
    assert!((hiprec::to_f64(&nz) - (2.0 * 2f64.sqrt() - 3.0)).abs() < 1e-15);
}

fn brute_force_p4(j_max: i64) -> Vec<IndexTuple> {
    let mut out = Vec::new();
    let r = -j_max..=j_max;
    for s in 0..16u32 {
        let sigma: [i8; 4] = std::array::from_fn(|a| if s >> a & 1 == 1 { 1 } else { -1 });
        for j1 in r.clone() {
            for j2 in r.clone() {
                for j3 in r.clone() {
                    for j4 in r.clone() {
                        let t = IndexTuple::new([j1, j2, j3, j4], sigma);
                        let mom: i64 = (0..4).map(|a| t.j[a] * t.sigma[a] as i64).sum();
                        let gauge: i64 = t.sigma.iter().map(|&x| x as i64).sum();
                        if mom == 0 && gauge == 0 {
                            out.push(t);
                        }
                    }
                }
            }
        }
    }
    out
}

#[test]
fn enumeration_matches_quadruple_loop() {
    for j_max in [1, 2, 3] {
        let ours: Vec<IndexTuple> = enumerate_p4(j_max).collect();
        let set: HashSet<IndexTuple> = ours.iter().cloned().collect();
        assert_eq!(set.len(), ours.len(), "duplicates at J = {j_max}");
        let oracle: HashSet<IndexTuple> = brute_force_p4(j_max).into_iter().collect();
        assert_eq!(set, oracle, "J = {j_max}");
        assert!(ours.iter().all(|t| t.sigma.iter().filter(|&&s| s > 0).count() == 2));
    }
    let t = IndexTuple::new([1, 1, 1, 1], [P, M, P, M]);
    assert!(enumerate_p4(1).any(|x| x == t));
    let mut streamed = 0usize;
    for j1 in -2..=2 {
        for_each_p4_with_j1(2, j1, |_| streamed += 1);
    }
    assert_eq!(streamed, enumerate_p4(2).count());
}

#[test]
fn omega_sum_examples() {
    let t = IndexTuple::new([4, 4, 7, 7], [P, M, P, M]);
    assert_eq!(omega_sum(&t, 0.5), 0.0);
    let t = IndexTuple::new([1, -1, 1, 3], [P, M, P, M]);
    assert!((omega_sum(&t, 0.5) - (1.0 - 3f64.sqrt())).abs() < 1e-15);
    assert_eq!(omega_sum(&t.flipped(), 0.5), -omega_sum(&t, 0.5));
}

#[test]
fn classify_examples() {
    let tag = classify(&IndexTuple::new([1, 1, 5, 5], [P, M, P, M]), 0.5);
    assert_eq!((tag.n_outside, tag.resonant), (2, true));
    let tag = classify(&IndexTuple::new([1, -1, 1, 3], [P, M, P, M]), 0.5);
    assert_eq!((tag.n_outside, tag.resonant), (1, false));
    let tag = classify(&IndexTuple::new([1, 1, 1, 1], [P, M, P, M]), 0.5);
    assert_eq!((tag.n_outside, tag.resonant), (0, true));
    // n = 0 with a non-structural sign pattern: ω = 2 ≠ 0.
    let tag = classify(&IndexTuple::new([1, -1, 1, -1], [P, P, M, M]), 0.5);
    assert_eq!((tag.n_outside, tag.resonant), (0, true));
    // Non-integrable resonance far from Λ.
    let tag = classify(&IndexTuple::new([2, 2, 8, -4], [P, P, M, M]), 0.5);
    assert_eq!((tag.n_outside, tag.resonant), (4, false));
    let tag = classify(&IndexTuple::new([2, 8, 8, 2], [P, P, M, M]), 0.5);
    assert_eq!((tag.n_outside, tag.resonant), (4, true));
}

#[test]
fn case_split_constant() {
    let alpha: f64 = 0.5;
    let j3 = 0.0f64;
    let v = ((j3 + 2.0).abs().powf(alpha) - j3.abs().powf(alpha)).abs();
    assert!((v - 2f64.powf(alpha)).abs() < 1e-15);
}

/// Audit recomputed tuple by tuple from the streaming enumeration.
fn audit_oracle(j_max: i64, alpha: f64) -> ([u64; 5], f64, f64) {
    let mut counts = [0u64; 5];
    let (mut m1, mut m2) = (f64::INFINITY, f64::INFINITY);
    for t in enumerate_p4(j_max) {
        let n = t.j.iter().filter(|j| j.abs() != 1).count();
        counts[n] += 1;
        let w: f64 = (0..4).map(|a| t.sigma[a] as f64 * (t.j[a].abs() as f64).powf(alpha)).sum::<f64>().abs();
        let mut plus: Vec<i64> = (0..4).filter(|&a| t.sigma[a] > 0).map(|a| t.j[a].abs()).collect();
        let mut minus: Vec<i64> = (0..4).filter(|&a| t.sigma[a] < 0).map(|a| t.j[a].abs()).collect();
        plus.sort();
        minus.sort();
        if n == 1 {
            m1 = m1.min(w);
        }
        if n == 2 && plus != minus {
            let mx = t.j.iter().map(|j| j.abs()).max().unwrap() as f64;
            m2 = m2.min(w * mx.powf(1.0 - alpha));
        }
    }
    (counts, m1, m2)
}

#[test]
fn audit_matches_enumeration_oracle() {
    for (j_max, alpha) in [(6, 0.5), (9, 0.3), (8, 0.75)] {
        let r = audit_lower_bounds(j_max, alpha).unwrap();
        let (counts, m1, m2) = audit_oracle(j_max, alpha);
        assert_eq!(r.counts, counts);
        assert!((r.min_p1.value - m1).abs() < 1e-14);
        assert!((r.min_p2_weighted.value - m2).abs() < 1e-14);
        assert_eq!(r.numeric_resonances_p1, 0);
        assert_eq!(r.numeric_resonances_p2, 0);
        assert_eq!(r.resonant_counts[1], 0);
    }
}

#[test]
fn single_outside_index_is_odd_and_bounded_away() {
    // Three indexes in Λ give an odd signed sum, so the fourth is odd.
    let r = audit_lower_bounds(12, 0.5).unwrap();
    let t = r.min_p1.tuple.unwrap();
    let outside = t.j.iter().find(|j| j.abs() != 1).unwrap();
    assert_eq!(outside.abs(), 3);
    assert!((r.min_p1.value - (3f64.sqrt() - 1.0)).abs() < 1e-14);
    assert!(r.min_p1.value >= r.proof_constant_p1);
    let json = serde_json::to_value(&r).unwrap();
    assert_eq!(json["J"], 12);
    assert!(json["min_p1"]["tuple"].is_object());
}

#[test]
fn audit_rejects_bad_arguments() {
    assert!(audit_lower_bounds(0, 0.5).is_err());
    assert!(audit_lower_bounds(5, 1.0).is_err());
}

#[test]
fn x3_examples() {
    let x = x3_coefficient([1, 1, 1], 1, [P, M, P], P);
    assert!((x * 3.0 - (-I)).norm() < 1e-15);
    let x = x3_coefficient([2, 0, 1], 3, [P, M, P], P);
    assert!((x - I * 0.5).norm() < 1e-15);
    // Mirrored pattern is the conjugate.
    let y = x3_coefficient([2, 0, 1], 3, [M, P, M], M);
    assert!((y - x.conj()).norm() < 1e-15);
    // Wrong sign pattern or momentum.
    assert_eq!(x3_coefficient([1, 1, 1], 1, [P, P, M], M), ZERO);
    assert_eq!(x3_coefficient([2, 0, 1], 2, [P, M, P], P), ZERO);
    assert_eq!(x3_coefficient([1, 1, 1], 1, [P, P, P], P), ZERO);
}

/// `|u|²u_x − M(u)u_x + iP(u)u` by direct convolution, truncated to `|k| ≤ J`.
fn x3_field_oracle(u: &FourierField, j_max: i64) -> FourierField {
    let k = u.k_max() as i64;
    let mass: f64 = u.modes().map(|(_, c)| c.norm_sqr()).sum();
    let mom: f64 = -u.modes().map(|(j, c)| j as f64 * c.norm_sqr()).sum::<f64>();
    let mut out = FourierField::zeros(j_max as usize);
    for j1 in -k..=k {
        for j2 in -k..=k {
            for j3 in -k..=k {
                let kk = j1 - j2 + j3;
                if kk.abs() <= j_max {
                    out.add(kk, u.get(j1) * u.get(j2).conj() * u.get(j3) * I * j3 as f64);
                }
            }
        }
    }
    for j in -k.min(j_max)..=k.min(j_max) {
        out.add(j, -u.get(j) * I * j as f64 * mass + I * mom * u.get(j));
    }
    out
}

#[test]
fn x3_table_evaluates_to_renormalized_cubic_field() {
    let j_max = 7;
    let table = x3_table(j_max);
    assert!(table.reality_defect() < 1e-15);
    for seed in 0..3 {
        let u = FourierField::random(j_max as usize, seed, 1.0, 0.0, 1.0);
        let (plus, minus) = table.evaluate(&u);
        let oracle = x3_field_oracle(&u, j_max);
        assert!(plus.max_abs_diff(&oracle) < 1e-13, "seed {seed}: {}", plus.max_abs_diff(&oracle));
        assert!(minus.max_abs_diff(&oracle.conj_coeffs()) < 1e-13);
    }
}

trait ConjCoeffs {
    fn conj_coeffs(&self) -> FourierField;
}

impl ConjCoeffs for FourierField {
    fn conj_coeffs(&self) -> FourierField {
        let mut out = self.clone();
        for c in out.coeffs_mut() {
            *c = c.conj();
        }
        out
    }
}

#[test]
fn projections_of_x3_match_closed_forms() {
    let alpha = 0.5;
    let table = x3_table(12);
    for n in 0..=2u8 {
        let proj = table.project(|t| in_resonant_class(t, n, alpha));
        let closed = proj_x3_closed_form(n, 12);
        assert!(proj.max_abs_diff(&closed) < 1e-15, "n = {n}");
    }
    assert_eq!(table.project(|_| true).max_abs_diff(&table), 0.0);
    assert!(table.project(|_| false).is_empty());
}

#[test]
fn from_entries_enforces_symmetry() {
    let key = CubicKey::new([2, 0, 1], [P, M, P], 3, P);
    let all: Vec<(CubicKey, Complex64)> = key.permutations().iter().map(|k| (*k, I)).collect();
    let t = CubicTable::from_entries(5, all.clone()).unwrap();
    assert_eq!(t.len(), 1);
    assert_eq!(t.get(&key.permutations()[3]), I);
    let mut broken = all.clone();
    broken[2].1 = -I;
    assert!(CubicTable::from_entries(5, broken).is_err());
    assert!(CubicTable::from_entries(5, all[..2].to_vec()).is_err());
    let off = CubicKey::new([2, 0, 1], [P, M, P], 2, P);
    assert!(CubicTable::from_entries(5, [(off, I)]).is_err());
}

#[test]
fn multiplicities() {
    assert_eq!(CubicKey::new([1, 1, 1], [P, M, P], 1, P).multiplicity(), 3);
    assert_eq!(CubicKey::new([2, 0, 1], [P, M, P], 3, P).multiplicity(), 6);
}

fn sign() -> impl Strategy<Value = i8> {
    prop_oneof![Just(1i8), Just(-1i8)]
}

proptest! {
    #[test]
    fn classify_is_permutation_invariant(
        j in prop::array::uniform3(-20i64..=20),
        s in prop::array::uniform3(sign()),
        perm in Just([0usize, 1, 2, 3]).prop_shuffle(),
    ) {
        let s4 = -(s[0] as i64 + s[1] as i64 + s[2] as i64);
        prop_assume!(s4.abs() == 1);
        let s4 = s4 as i8;
        let j4 = -(s4 as i64) * (0..3).map(|a| j[a] * s[a] as i64).sum::<i64>();
        let t = IndexTuple::new([j[0], j[1], j[2], j4], [s[0], s[1], s[2], s4]);
        prop_assert!(t.in_p4());
        let q = IndexTuple::new(perm.map(|p| t.j[p]), perm.map(|p| t.sigma[p]));
        prop_assert_eq!(classify(&t, 0.5), classify(&q, 0.5));
        prop_assert_eq!(classify(&t, 0.5), classify(&t.flipped(), 0.5));
    }

    #[test]
    fn x3_is_symmetric(j in prop::array::uniform2(-10i64..=10), k in -10i64..=10, perm in Just([0usize, 1, 2]).prop_shuffle()) {
        // Complete (j1, j2, ·) with the + index fixed by momentum.
        let j3 = k - j[0] + j[1];
        let js = [j[0], j[1], j3];
        let ss = [P, M, P];
        let a = x3_coefficient(js, k, ss, P);
        let b = x3_coefficient(perm.map(|p| js[p]), k, perm.map(|p| ss[p]), P);
        prop_assert_eq!(a, b);
    }
}
