#![allow(dead_code)]

use geocov::SpdMatrix;
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian_matrix(rng: &mut impl Rng, r: usize, c: usize) -> DMatrix<f64> {
    DMatrix::from_fn(r, c, |_, _| rng.sample(StandardNormal))
}

pub fn random_orthogonal(rng: &mut impl Rng, n: usize) -> DMatrix<f64> {
    gaussian_matrix(rng, n, n).qr().q()
}

/// `Q diag(exp(u)) Qᵀ` with `u` uniform in `[−spread, spread]`.
pub fn random_spd(rng: &mut impl Rng, n: usize, spread: f64) -> SpdMatrix<f64> {
    let q = random_orthogonal(rng, n);
    let d = DVector::from_fn(n, |_, _| rng.random_range(-spread..=spread).exp());
    let m = &q * DMatrix::from_diagonal(&d) * q.transpose();
    SpdMatrix::new((&m + m.transpose()) * 0.5).unwrap()
}

/// `B Bᵀ / m` with `B` an n×m Gaussian matrix.
pub fn wishart(rng: &mut impl Rng, n: usize, m: usize) -> SpdMatrix<f64> {
    let b = gaussian_matrix(rng, n, m);
    SpdMatrix::new(&b * b.transpose() / m as f64).unwrap()
}

/// Draws `q` samples of `N(0, cov)`.
pub fn gaussian_samples(rng: &mut impl Rng, cov: &SpdMatrix<f64>, q: usize) -> Vec<DVector<f64>> {
    let l = cov.as_matrix().clone().cholesky().unwrap().unpack();
    (0..q)
        .map(|_| &l * DVector::from_fn(cov.dim(), |_, _| rng.sample(StandardNormal)))
        .collect()
}

pub fn rel_err(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).norm() / b.norm().max(1e-300)
}

/// Principal square root by the Denman–Beavers iteration (works for
/// non-symmetric matrices with positive real spectrum).
pub fn db_sqrt(a: &DMatrix<f64>) -> DMatrix<f64> {
    let n = a.nrows();
    let mut y = a.clone();
    let mut z = DMatrix::identity(n, n);
    for _ in 0..100 {
        let yi = y.clone().try_inverse().unwrap();
        let zi = z.clone().try_inverse().unwrap();
        let ny = (&y + zi) * 0.5;
        let nz = (&z + yi) * 0.5;
        let done = (&ny - &y).norm() <= 1e-15 * ny.norm();
        y = ny;
        z = nz;
        if done {
            break;
        }
    }
    y
}

/// Matrix logarithm by inverse scaling and squaring with a Mercator series,
/// independent of any eigendecomposition.
pub fn series_log(a: &DMatrix<f64>) -> DMatrix<f64> {
    let n = a.nrows();
    let id = DMatrix::<f64>::identity(n, n);
    let mut x = a.clone();
    let mut k = 0;
    while (&x - &id).norm() > 1e-3 {
        x = db_sqrt(&x);
        k += 1;
    }
    let e = &x - &id;
    let mut term = e.clone();
    let mut sum = DMatrix::zeros(n, n);
    for j in 1..40 {
        let sign = if j % 2 == 1 { 1.0 } else { -1.0 };
        sum += &term * (sign / j as f64);
        term = &term * &e;
    }
    sum * 2f64.powi(k)
}

/// Minimizer of `f` on a uniform grid over `[lo, hi]`.
pub fn grid_argmin(f: impl Fn(f64) -> f64, lo: f64, hi: f64, step: f64) -> f64 {
    let n = ((hi - lo) / step).round() as usize;
    let mut best = (0, f64::INFINITY);
    for i in 0..=n {
        let v = f(lo + i as f64 * step);
        if v < best.1 {
            best = (i, v);
        }
    }
    lo + best.0 as f64 * step
}

/// Symmetric matrix function through nalgebra's own eigensolver.
pub fn sym_fn(a: &DMatrix<f64>, f: impl Fn(f64) -> f64) -> DMatrix<f64> {
    let e = a.clone().symmetric_eigen();
    let d = DMatrix::from_diagonal(&e.eigenvalues.map(f));
    &e.eigenvectors * d * e.eigenvectors.transpose()
}

/// Geodesic point `A^{1/2}(A^{-1/2} B A^{-1/2})^t A^{1/2}` computed directly.
pub fn geodesic(a: &DMatrix<f64>, b: &DMatrix<f64>, t: f64) -> DMatrix<f64> {
    let s = sym_fn(a, f64::sqrt);
    let si = sym_fn(a, |v| 1.0 / v.sqrt());
    let w = &si * b * &si;
    let w = (&w + w.transpose()) * 0.5;
    &s * sym_fn(&w, |v| v.powf(t)) * &s
}

/// Eigenvalues of `A⁻¹B` through a Cholesky factor of `A`.
pub fn pencil_eigs(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Vec<f64> {
    let l = a.clone().cholesky().unwrap().l();
    let li = l.try_inverse().unwrap();
    let w = &li * b * li.transpose();
    let w = (&w + w.transpose()) * 0.5;
    w.symmetric_eigen().eigenvalues.iter().copied().collect()
}

pub fn distance(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    pencil_eigs(a, b)
        .iter()
        .map(|v| v.ln().powi(2))
        .sum::<f64>()
        .sqrt()
}

/// `KL(N(0,a) ‖ N(0,b)) = ½[tr(b⁻¹a) − n + ln det b − ln det a]`.
pub fn kl(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    let n = a.nrows() as f64;
    let binv = b.clone().try_inverse().unwrap();
    0.5 * ((&binv * a).trace() - n + b.determinant().ln() - a.determinant().ln())
}
