//! Dense complex linear algebra on the truncated Fourier basis.

use ndarray::{s, Array1, Array2, Axis};
use ndarray_linalg::{Eigh, Inverse, SVD, UPLO};
use num_complex::Complex64;

use crate::fourier::{japanese, FourierField, ZERO};
use crate::Error;

pub type CMat = Array2<Complex64>;

pub fn identity(n: usize) -> CMat {
    Array2::from_diag_elem(n, Complex64::new(1.0, 0.0))
}

pub fn apply(a: &CMat, u: &FourierField) -> FourierField {
    let v = Array1::from(u.coeffs().to_vec());
    FourierField::from_vec(a.dot(&v).to_vec()).expect("square operator")
}

pub fn adjoint(a: &CMat) -> CMat {
    a.t().mapv(|z| z.conj())
}

/// `(A + A*)/2`.
pub fn hermitian_part(a: &CMat) -> CMat {
    (a + &adjoint(a)).mapv(|z| z * 0.5)
}

/// Diagonal weights `⟨k⟩^σ` on `k ∈ [-K, K]`.
pub fn sobolev_weights(k_max: usize, sigma: f64) -> Vec<f64> {
    let km = k_max as i64;
    (-km..=km).map(|k| japanese(k as f64).powf(sigma)).collect()
}

/// `D_{left} A D_{right}` with diagonal weights given as vectors.
pub fn scale_rows_cols(a: &CMat, left: &[f64], right: &[f64]) -> CMat {
    let mut out = a.clone();
    for ((i, j), z) in out.indexed_iter_mut() {
        *z *= left[i] * right[j];
    }
    out
}

/// `D_{s'} A D_s^{-1}` on the basis of radius `K`.
pub fn sobolev_conjugate(a: &CMat, k_max: usize, s_in: f64, s_out: f64) -> CMat {
    scale_rows_cols(a, &sobolev_weights(k_max, s_out), &sobolev_weights(k_max, -s_in))
}

pub fn max_singular_value(a: &CMat) -> Result<f64, Error> {
    if a.is_empty() {
        return Ok(0.0);
    }
    let (_, sv, _) = a.svd(false, false).map_err(|e| Error::Linalg(e.to_string()))?;
    Ok(sv.iter().cloned().fold(0.0, f64::max))
}

/// Operator norm `H^{s_in} → H^{s_out}`.
pub fn sobolev_op_norm(a: &CMat, k_max: usize, s_in: f64, s_out: f64) -> Result<f64, Error> {
    max_singular_value(&sobolev_conjugate(a, k_max, s_in, s_out))
}

pub fn max_abs(a: &CMat) -> f64 {
    a.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

pub fn max_abs_diff(a: &CMat, b: &CMat) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

/// Largest dimension for which extreme eigenvalues use a full decomposition.
pub const DENSE_EIGEN_LIMIT: usize = 2 * 512 + 1;

/// Smallest eigenvalue of a Hermitian matrix. Uses a full decomposition up to
/// [`DENSE_EIGEN_LIMIT`] and Lanczos above it.
pub fn min_eigenvalue(h: &CMat) -> Result<f64, Error> {
    if h.nrows() <= DENSE_EIGEN_LIMIT {
        min_eigenvalue_dense(h)
    } else {
        min_eigenvalue_lanczos(h, 1e-10, 400)
    }
}

pub fn min_eigenvalue_dense(h: &CMat) -> Result<f64, Error> {
    if h.is_empty() {
        return Ok(0.0);
    }
    let (e, _) = h.eigh(UPLO::Lower).map_err(|e| Error::Linalg(e.to_string()))?;
    Ok(e.iter().cloned().fold(f64::INFINITY, f64::min))
}

/// Lanczos with full reorthogonalization for the smallest eigenvalue.
pub fn min_eigenvalue_lanczos(h: &CMat, tol: f64, max_iter: usize) -> Result<f64, Error> {
    let n = h.nrows();
    if n == 0 {
        return Ok(0.0);
    }
    let m_max = max_iter.min(n);
    let mut basis: Vec<Array1<Complex64>> = Vec::with_capacity(m_max);
    let mut alpha = Vec::with_capacity(m_max);
    let mut beta: Vec<f64> = Vec::with_capacity(m_max);
    // Deterministic start vector with all modes excited.
    let mut q = Array1::from_shape_fn(n, |i| Complex64::new(1.0 + (i as f64 * 0.618).sin(), (i as f64 * 0.377).cos()));
    let nrm = q.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    q.mapv_inplace(|z| z / nrm);
    let mut last = f64::INFINITY;
    for it in 0..m_max {
        let mut w = h.dot(&q);
        let a: f64 = q.iter().zip(w.iter()).map(|(x, y)| (x.conj() * y).re).sum();
        alpha.push(a);
        basis.push(q.clone());
        for _ in 0..2 {
            for b in &basis {
                let c: Complex64 = b.iter().zip(w.iter()).map(|(x, y)| x.conj() * y).sum();
                w.scaled_add(-c, b);
            }
        }
        let bnorm = w.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        let theta = tridiagonal_min(&alpha, &beta)?;
        if (it > 10 && (theta - last).abs() <= tol * theta.abs().max(1.0)) || bnorm < 1e-14 {
            return Ok(theta);
        }
        last = theta;
        beta.push(bnorm);
        q = w.mapv(|z| z / bnorm);
    }
    Ok(last)
}

fn tridiagonal_min(alpha: &[f64], beta: &[f64]) -> Result<f64, Error> {
    let m = alpha.len();
    let mut t = Array2::<f64>::zeros((m, m));
    for i in 0..m {
        t[[i, i]] = alpha[i];
        if i + 1 < m {
            t[[i, i + 1]] = beta[i];
            t[[i + 1, i]] = beta[i];
        }
    }
    let (e, _) = t.eigh(UPLO::Lower).map_err(|e| Error::Linalg(e.to_string()))?;
    Ok(e.iter().cloned().fold(f64::INFINITY, f64::min))
}

fn one_norm(a: &CMat) -> f64 {
    a.axis_iter(Axis(1)).map(|col| col.iter().map(|z| z.norm()).sum::<f64>()).fold(0.0, f64::max)
}

/// Matrix exponential by scaling and squaring with the degree-13 Padé
/// approximant.
pub fn expm(a: &CMat) -> Result<CMat, Error> {
    const B: [f64; 14] = [
        64764752532480000.0,
        32382376266240000.0,
        7771770303897600.0,
        1187353796428800.0,
        129060195264000.0,
        10559470521600.0,
        670442572800.0,
        33522128640.0,
        1323241920.0,
        40840800.0,
        960960.0,
        16380.0,
        182.0,
        1.0,
    ];
    const THETA13: f64 = 5.371920351148152;
    let n = a.nrows();
    let norm = one_norm(a);
    let squarings = if norm > THETA13 { (norm / THETA13).log2().ceil() as i32 } else { 0 };
    let a = a.mapv(|z| z / 2f64.powi(squarings));
    let id = identity(n);
    let a2 = a.dot(&a);
    let a4 = a2.dot(&a2);
    let a6 = a4.dot(&a2);
    let c = |k: usize| Complex64::new(B[k], 0.0);
    let u_inner = a6.mapv(|z| z * c(13)) + a4.mapv(|z| z * c(11)) + a2.mapv(|z| z * c(9));
    let u_tail = a6.mapv(|z| z * c(7)) + a4.mapv(|z| z * c(5)) + a2.mapv(|z| z * c(3)) + id.mapv(|z| z * c(1));
    let u = a.dot(&(a6.dot(&u_inner) + u_tail));
    let v_inner = a6.mapv(|z| z * c(12)) + a4.mapv(|z| z * c(10)) + a2.mapv(|z| z * c(8));
    let v = a6.dot(&v_inner)
        + a6.mapv(|z| z * c(6))
        + a4.mapv(|z| z * c(4))
        + a2.mapv(|z| z * c(2))
        + id.mapv(|z| z * c(0));
    let p = &v + &u;
    let q = &v - &u;
    let qinv = q.inv().map_err(|e| Error::Linalg(e.to_string()))?;
    let mut r = qinv.dot(&p);
    for _ in 0..squarings {
        r = r.dot(&r);
    }
    Ok(r)
}

/// Restriction of an operator built on radius `k_big` to the radius `k_small`
/// block (both centred at `k = 0`).
pub fn restrict(a: &CMat, k_big: usize, k_small: usize) -> CMat {
    assert!(k_small <= k_big);
    let off = k_big - k_small;
    let n = 2 * k_small + 1;
    a.slice(s![off..off + n, off..off + n]).to_owned()
}

/// Embeds a radius `k_small` operator into radius `k_big`, zero elsewhere.
pub fn embed(a: &CMat, k_small: usize, k_big: usize) -> CMat {
    let off = k_big - k_small;
    let n = 2 * k_small + 1;
    let mut out = Array2::from_elem((2 * k_big + 1, 2 * k_big + 1), ZERO);
    out.slice_mut(s![off..off + n, off..off + n]).assign(a);
    out
}
