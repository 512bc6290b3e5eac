//! Fixed-point arithmetic on big integers for frequency sums `Σ σ_a |j_a|^α`
//! at well beyond 50 significant digits.
//!
//! Values are integers scaled by `2^FRAC_BITS`. `α` is taken to be the exact
//! dyadic rational represented by the `f64`.

use num_bigint::{BigInt, Sign};
use num_traits::{One, Signed, ToPrimitive, Zero};

/// Fractional bits of the fixed-point representation (about 72 digits).
pub const FRAC_BITS: u64 = 240;

/// Values below `2^{-ZERO_BITS}` count as zero; `2^{-170} ≈ 7e-52`.
pub const ZERO_BITS: u64 = 170;

fn one() -> BigInt {
    BigInt::one() << FRAC_BITS
}

fn mul(a: &BigInt, b: &BigInt) -> BigInt {
    (a * b) >> FRAC_BITS
}

/// `atanh(z) = Σ z^{2n+1}/(2n+1)` for a fixed-point `0 ≤ z ≤ 1/3`.
fn atanh(z: &BigInt) -> BigInt {
    let z2 = mul(z, z);
    let mut power = z.clone();
    let mut sum = BigInt::zero();
    let mut n = 1u64;
    while !power.is_zero() {
        sum += &power / BigInt::from(n);
        power = mul(&power, &z2);
        n += 2;
    }
    sum
}

pub fn ln2() -> BigInt {
    atanh(&(one() / BigInt::from(3))) * 2
}

/// `ln x` for an integer `x ≥ 1`.
pub fn ln_int(x: u64) -> BigInt {
    assert!(x >= 1);
    let k = 63 - x.leading_zeros() as u64;
    let base = 1u64 << k;
    // x = 2^k y with y ∈ [1, 2); ln y = 2 atanh((y-1)/(y+1)).
    let z = (BigInt::from(x - base) << FRAC_BITS) / BigInt::from(x + base);
    ln2() * BigInt::from(k) + atanh(&z) * 2
}

/// `exp(v)` for a fixed-point `v ≥ 0`.
pub fn exp_fixed(v: &BigInt) -> BigInt {
    assert!(!v.is_negative());
    let l2 = ln2();
    let n = v / &l2;
    let r = v - &n * &l2;
    let mut term = one();
    let mut sum = BigInt::zero();
    let mut k = 1u64;
    while !term.is_zero() {
        sum += &term;
        term = mul(&term, &r) / BigInt::from(k);
        k += 1;
    }
    sum << n.to_u64().expect("exponent fits")
}

/// `x^α` in fixed point, with `0^α = 0`.
pub fn pow_int(x: u64, alpha: f64) -> BigInt {
    assert!(alpha > 0.0 && alpha.is_finite());
    if x == 0 {
        return BigInt::zero();
    }
    let (mant, exp, sign) = num_traits::float::FloatCore::integer_decode(alpha);
    assert_eq!(sign, 1);
    let l = ln_int(x) * BigInt::from(mant);
    let scaled = if exp < 0 { l >> (-exp) as u64 } else { l << exp as u64 };
    exp_fixed(&scaled)
}

/// `Σ σ_a |j_a|^α` in fixed point.
pub fn omega_sum(j: &[i64], sigma: &[i8], alpha: f64) -> BigInt {
    j.iter()
        .zip(sigma)
        .map(|(&ja, &sa)| {
            let p = pow_int(ja.unsigned_abs(), alpha);
            if sa > 0 {
                p
            } else {
                -p
            }
        })
        .sum()
}

pub fn is_zero(v: &BigInt) -> bool {
    v.abs() < (BigInt::one() << (FRAC_BITS - ZERO_BITS))
}

pub fn to_f64(v: &BigInt) -> f64 {
    let (sign, mag) = (v.sign(), v.magnitude());
    let bits = mag.bits();
    let shift = bits.saturating_sub(60);
    let top = (mag >> shift).to_f64().unwrap_or(0.0);
    let value = top * 2f64.powi(shift as i32 - FRAC_BITS as i32);
    if sign == Sign::Minus {
        -value
    } else {
        value
    }
}
