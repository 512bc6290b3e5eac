//! Shared inputs for the benchmarks.

use fracnls_core::fourier::{FourierField, ZERO};
use fracnls_core::mourre::{build_wellprepared, MourreSetup, WellPreparedData};

/// Desk-parameter well-prepared data and its Mourre setup at `K = 256`.
pub fn desk_setup() -> (WellPreparedData, MourreSetup) {
    build_wellprepared(0.5, 0.05, 0.5, 7.0, 0.6, 0.6, 1e-10, 256).expect("desk parameters are admissible")
}

/// Random field with `‖u‖_{H²} = norm`.
pub fn random_field(k_max: usize, seed: u64, norm: f64) -> FourierField {
    FourierField::random(k_max, seed, 1.0, 2.0, norm)
}

/// Random field supported away from `Λ = {±1}`.
pub fn random_normal_field(k_max: usize, seed: u64) -> FourierField {
    let mut z = FourierField::random(k_max, seed, 1.0, 0.0, 1.0);
    z.set(1, ZERO);
    z.set(-1, ZERO);
    z
}
