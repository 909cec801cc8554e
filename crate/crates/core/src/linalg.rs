//! Dense symmetric eigen helpers used by the matrix functions.

use nalgebra::{DMatrix, DVector};

use crate::scalar::Real;

/// Orthonormal eigendecomposition `V diag(values) Vᵀ` of a symmetric matrix,
/// eigenvalues sorted in descending order (stable for ties).
#[derive(Clone, Debug)]
pub struct SymEigen<T: Real> {
    pub values: DVector<T>,
    pub vectors: DMatrix<T>,
}

impl<T: Real> SymEigen<T> {
    /// Decomposes `m`, which is assumed symmetric (only the lower triangle is read).
    pub fn new(m: &DMatrix<T>) -> Self {
        let eig = m.clone().symmetric_eigen();
        let n = eig.eigenvalues.len();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| {
            eig.eigenvalues[b]
                .partial_cmp(&eig.eigenvalues[a])
                .unwrap_or(std::cmp::Ordering::Equal)
        });
        let values = DVector::from_iterator(n, order.iter().map(|&i| eig.eigenvalues[i]));
        let mut vectors = DMatrix::zeros(n, n);
        for (dst, &src) in order.iter().enumerate() {
            vectors.set_column(dst, &eig.eigenvectors.column(src));
        }
        Self { values, vectors }
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn max(&self) -> T {
        self.values[0]
    }

    pub fn min(&self) -> T {
        self.values[self.values.len() - 1]
    }

    /// `V diag(f(values)) Vᵀ`, exactly symmetric.
    pub fn map(&self, f: impl Fn(T) -> T) -> DMatrix<T> {
        let mut scaled = self.vectors.clone();
        for (j, mut col) in scaled.column_iter_mut().enumerate() {
            col *= f(self.values[j]);
        }
        let mut out = &scaled * self.vectors.transpose();
        symmetrize_in_place(&mut out);
        out
    }
}

/// Replaces `m` with `(m + mᵀ)/2`.
pub fn symmetrize_in_place<T: Real>(m: &mut DMatrix<T>) {
    let n = m.nrows();
    let half = T::lit(0.5);
    for i in 0..n {
        for j in (i + 1)..n {
            let v = (m[(i, j)] + m[(j, i)]) * half;
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
}

/// `B Bᵀ`, exactly symmetric.
pub fn gram<T: Real>(b: &DMatrix<T>) -> DMatrix<T> {
    let mut out = b * b.transpose();
    symmetrize_in_place(&mut out);
    out
}

/// `Tr(A B)` without forming the product.
pub fn trace_product<T: Real>(a: &DMatrix<T>, b: &DMatrix<T>) -> T {
    let mut acc = T::zero();
    for i in 0..a.nrows() {
        for j in 0..a.ncols() {
            acc += a[(i, j)] * b[(j, i)];
        }
    }
    acc
}

/// Largest absolute entry.
pub fn max_abs<T: Real>(m: &DMatrix<T>) -> T {
    m.iter().fold(T::zero(), |acc, v| acc.max(v.abs()))
}

/// `‖a − b‖_F / ‖b‖_F` (absolute when `b` vanishes).
pub fn relative_frobenius<T: Real>(a: &DMatrix<T>, b: &DMatrix<T>) -> T {
    let diff = (a - b).norm();
    let scale = b.norm();
    if scale > T::zero() {
        diff / scale
    } else {
        diff
    }
}

/// Singular values of `m` by one-sided (Hestenes) Jacobi, unsorted.
///
/// Accurate to a small relative error when `m = B D` with `D` diagonal and
/// `B` well conditioned, however wide the range of `D`.
pub fn jacobi_singular_values<T: Real>(mut m: DMatrix<T>) -> DVector<T> {
    let n = m.ncols();
    let eps = T::default_epsilon();
    for _ in 0..80 {
        let mut rotated = false;
        for i in 0..n {
            for j in (i + 1)..n {
                let a = m.column(i).norm_squared();
                let b = m.column(j).norm_squared();
                let g = m.column(i).dot(&m.column(j));
                if g.abs() <= eps * (a * b).sqrt() || g == T::zero() {
                    continue;
                }
                rotated = true;
                let zeta = (b - a) / (T::lit(2.0) * g);
                let t = zeta.signum() / (zeta.abs() + (T::one() + zeta * zeta).sqrt());
                let c = T::one() / (T::one() + t * t).sqrt();
                let s = c * t;
                for k in 0..m.nrows() {
                    let (x, y) = (m[(k, i)], m[(k, j)]);
                    m[(k, i)] = c * x - s * y;
                    m[(k, j)] = s * x + c * y;
                }
            }
        }
        if !rotated {
            break;
        }
    }
    DVector::from_fn(n, |j, _| m.column(j).norm())
}
