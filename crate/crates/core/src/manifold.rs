//! Geometry of the manifold of symmetric positive-definite matrices under the
//! affine-invariant metric `g_A(X, Y) = Tr(X A⁻¹ Y A⁻¹)`.
//!
//! Everything is computed from symmetric eigendecompositions: square roots,
//! matrix logarithms and exponentials, and the pencil `(A₂, A₁)` through the
//! whitened matrix `A₁^{-1/2} A₂ A₁^{-1/2}`. The non-symmetric product
//! `A₁⁻¹A₂` is never formed.
//!
//! ```text
//! d(A₁, A₂)  = ‖log(A₁^{-1/2} A₂ A₁^{-1/2})‖_F = sqrt(Σ log² λ_k)
//! φ(t)       = A₁^{1/2} U Λᵗ Uᵀ A₁^{1/2}
//! log_A(B)   = A^{1/2} log(A^{-1/2} B A^{-1/2}) A^{1/2}
//! exp_A(X)   = A^{1/2} exp(A^{-1/2} X A^{-1/2}) A^{1/2}
//! ```

use nalgebra::{Cholesky, DMatrix, DVector};

use crate::error::{GeoError, Result};
use crate::linalg::{
    gram, max_abs, relative_frobenius, symmetrize_in_place, trace_product, SymEigen,
};
use crate::scalar::Real;

fn check_square<T: Real>(m: &DMatrix<T>) -> Result<usize> {
    if m.nrows() != m.ncols() {
        return Err(GeoError::NotSquare {
            rows: m.nrows(),
            cols: m.ncols(),
        });
    }
    if m.nrows() == 0 {
        return Err(GeoError::InvalidArgument("empty matrix".into()));
    }
    if m.iter().any(|v| !v.is_finite()) {
        return Err(GeoError::NonFinite);
    }
    Ok(m.nrows())
}

fn check_symmetric<T: Real>(m: &mut DMatrix<T>) -> Result<()> {
    let scale = max_abs(m);
    let mut asym = T::zero();
    for i in 0..m.nrows() {
        for j in (i + 1)..m.ncols() {
            asym = asym.max((m[(i, j)] - m[(j, i)]).abs());
        }
    }
    let rel = if scale > T::zero() {
        asym / scale
    } else {
        asym
    };
    if rel > T::lit(T::SYM_TOL) {
        return Err(GeoError::NotSymmetric {
            asymmetry: rel.as_f64(),
        });
    }
    symmetrize_in_place(m);
    Ok(())
}

pub(crate) fn check_dims(expected: usize, found: usize) -> Result<()> {
    if expected != found {
        return Err(GeoError::DimensionMismatch { expected, found });
    }
    Ok(())
}

/// Symmetric matrix; a tangent vector to the SPD manifold.
#[derive(Clone, Debug, PartialEq)]
pub struct SymMatrix<T: Real> {
    m: DMatrix<T>,
}

impl<T: Real> SymMatrix<T> {
    /// Validates symmetry within the relative tolerance and symmetrizes.
    pub fn new(mut m: DMatrix<T>) -> Result<Self> {
        check_square(&m)?;
        check_symmetric(&mut m)?;
        Ok(Self { m })
    }

    pub fn zeros(n: usize) -> Self {
        Self {
            m: DMatrix::zeros(n, n),
        }
    }

    pub fn identity(n: usize) -> Self {
        Self {
            m: DMatrix::identity(n, n),
        }
    }

    pub fn from_diagonal(diag: &[T]) -> Self {
        Self {
            m: DMatrix::from_diagonal(&DVector::from_column_slice(diag)),
        }
    }

    pub(crate) fn from_trusted(mut m: DMatrix<T>) -> Self {
        symmetrize_in_place(&mut m);
        Self { m }
    }

    pub fn dim(&self) -> usize {
        self.m.nrows()
    }

    pub fn as_matrix(&self) -> &DMatrix<T> {
        &self.m
    }

    pub fn into_matrix(self) -> DMatrix<T> {
        self.m
    }

    pub fn frobenius_norm(&self) -> T {
        self.m.norm()
    }

    pub fn eigen(&self) -> SymEigen<T> {
        SymEigen::new(&self.m)
    }
}

/// Dense symmetric positive-definite matrix.
///
/// Construction rejects asymmetry above `SYM_TOL` (relative) and eigenvalues
/// at or below `PD_TOL` times the largest one. Instances are immutable.
#[derive(Clone, Debug, PartialEq)]
pub struct SpdMatrix<T: Real> {
    m: DMatrix<T>,
}

impl<T: Real> SpdMatrix<T> {
    pub fn new(mut m: DMatrix<T>) -> Result<Self> {
        check_square(&m)?;
        check_symmetric(&mut m)?;
        let eig = SymEigen::new(&m);
        check_definite(&eig)?;
        Ok(Self { m })
    }

    pub fn from_row_slice(n: usize, data: &[T]) -> Result<Self> {
        if data.len() != n * n {
            return Err(GeoError::DimensionMismatch {
                expected: n * n,
                found: data.len(),
            });
        }
        Self::new(DMatrix::from_row_slice(n, n, data))
    }

    pub fn from_diagonal(diag: &[T]) -> Result<Self> {
        Self::new(DMatrix::from_diagonal(&DVector::from_column_slice(diag)))
    }

    pub fn identity(n: usize) -> Self {
        Self {
            m: DMatrix::identity(n, n),
        }
    }

    /// Wraps a matrix that is SPD by construction (e.g. `B Bᵀ` with `B`
    /// invertible); only symmetrizes.
    pub(crate) fn from_trusted(mut m: DMatrix<T>) -> Self {
        symmetrize_in_place(&mut m);
        Self { m }
    }

    pub fn dim(&self) -> usize {
        self.m.nrows()
    }

    pub fn as_matrix(&self) -> &DMatrix<T> {
        &self.m
    }

    pub fn into_matrix(self) -> DMatrix<T> {
        self.m
    }

    pub fn eigen(&self) -> SymEigen<T> {
        SymEigen::new(&self.m)
    }

    pub fn trace(&self) -> T {
        self.m.trace()
    }

    fn cholesky(&self) -> Cholesky<T, nalgebra::Dyn> {
        Cholesky::new(self.m.clone()).expect("SPD matrix admits a Cholesky factor")
    }

    pub fn inverse(&self) -> Self {
        Self::from_trusted(self.cholesky().inverse())
    }

    pub fn log_det(&self) -> T {
        let chol = self.cholesky();
        let l = chol.l_dirty();
        let two = T::lit(2.0);
        (0..self.dim()).fold(T::zero(), |acc, i| acc + two * l[(i, i)].ln())
    }

    /// `A⁻¹ X` for a right-hand side matrix.
    pub fn solve(&self, rhs: &DMatrix<T>) -> DMatrix<T> {
        self.cholesky().solve(rhs)
    }

    /// `αA` for `α > 0`.
    pub fn scaled(&self, alpha: T) -> Result<Self> {
        if !(alpha > T::zero()) || !alpha.is_finite() {
            return Err(GeoError::InvalidArgument(format!(
                "scaling factor must be positive, got {alpha}"
            )));
        }
        Ok(Self { m: &self.m * alpha })
    }

    /// `Z A Zᵀ`; fails when `Z` is singular (the result is not SPD).
    pub fn congruence(&self, z: &DMatrix<T>) -> Result<Self> {
        check_dims(self.dim(), z.nrows())?;
        check_dims(self.dim(), z.ncols())?;
        Self::new(z * &self.m * z.transpose())
    }
}

impl<T: Real> AsRef<DMatrix<T>> for SpdMatrix<T> {
    fn as_ref(&self) -> &DMatrix<T> {
        &self.m
    }
}

fn check_definite<T: Real>(eig: &SymEigen<T>) -> Result<()> {
    let max = eig.max();
    let min = eig.min();
    let threshold = T::lit(T::PD_TOL) * max.abs();
    if !(max > T::zero()) || !(min > threshold) {
        return Err(GeoError::NotPositiveDefinite {
            eigenvalue: min.as_f64(),
            threshold: threshold.as_f64(),
        });
    }
    Ok(())
}

/// Symmetric square root `S = A^{1/2}` together with `S⁻¹`.
#[derive(Clone, Debug)]
pub struct SymSqrt<T: Real> {
    pub sqrt: SpdMatrix<T>,
    pub inv_sqrt: SpdMatrix<T>,
}

pub fn sym_sqrt<T: Real>(a: &SpdMatrix<T>) -> Result<SymSqrt<T>> {
    let eig = a.eigen();
    check_definite(&eig)?;
    Ok(SymSqrt {
        sqrt: SpdMatrix::from_trusted(eig.map(|v| v.sqrt())),
        inv_sqrt: SpdMatrix::from_trusted(eig.map(|v| T::one() / v.sqrt())),
    })
}

/// Principal matrix logarithm of an SPD matrix.
pub fn sym_log<T: Real>(a: &SpdMatrix<T>) -> SymMatrix<T> {
    SymMatrix::from_trusted(a.eigen().map(|v| v.ln()))
}

/// Matrix exponential of a symmetric matrix.
pub fn sym_exp<T: Real>(x: &SymMatrix<T>) -> SpdMatrix<T> {
    SpdMatrix::from_trusted(x.eigen().map(|v| v.exp()))
}

/// `Aᵗ` for real `t`.
pub fn spd_pow<T: Real>(a: &SpdMatrix<T>, t: T) -> SpdMatrix<T> {
    SpdMatrix::from_trusted(a.eigen().map(|v| v.powf(t)))
}

/// Eigenvalues of the pencil `(A₂, A₁)`, descending, computed from a
/// Cholesky whitening of `A₁`.
pub fn generalized_eigenvalues<T: Real>(
    a1: &SpdMatrix<T>,
    a2: &SpdMatrix<T>,
) -> Result<DVector<T>> {
    check_dims(a1.dim(), a2.dim())?;
    let chol = a1.cholesky();
    let l = chol.l();
    let half = l
        .solve_lower_triangular(a2.as_matrix())
        .expect("Cholesky factor is invertible");
    let mut w = l
        .solve_lower_triangular(&half.transpose())
        .expect("Cholesky factor is invertible");
    symmetrize_in_place(&mut w);
    Ok(SymEigen::new(&w).values)
}

/// Cached eigenstructure of the whitened pencil:
/// `A₁^{-1/2} A₂ A₁^{-1/2} = U diag(λ) Uᵀ`, `λ` descending.
#[derive(Clone, Debug)]
pub struct PencilDecomposition<T: Real> {
    pub sqrt_a1: SpdMatrix<T>,
    pub inv_sqrt_a1: SpdMatrix<T>,
    pub u: DMatrix<T>,
    pub lambda: DVector<T>,
}

pub fn pencil_decompose<T: Real>(
    a1: &SpdMatrix<T>,
    a2: &SpdMatrix<T>,
) -> Result<PencilDecomposition<T>> {
    check_dims(a1.dim(), a2.dim())?;
    let SymSqrt { sqrt, inv_sqrt } = sym_sqrt(a1)?;
    let mut w = inv_sqrt.as_matrix() * a2.as_matrix() * inv_sqrt.as_matrix();
    symmetrize_in_place(&mut w);
    let eig = SymEigen::new(&w);
    if !(eig.min() > T::zero()) {
        return Err(GeoError::NotPositiveDefinite {
            eigenvalue: eig.min().as_f64(),
            threshold: 0.0,
        });
    }
    Ok(PencilDecomposition {
        sqrt_a1: sqrt,
        inv_sqrt_a1: inv_sqrt,
        u: eig.vectors,
        lambda: eig.values,
    })
}

impl<T: Real> PencilDecomposition<T> {
    pub fn dim(&self) -> usize {
        self.lambda.len()
    }

    pub fn log_lambda(&self) -> DVector<T> {
        self.lambda.map(|v| v.ln())
    }

    /// `d(A₁, A₂)`.
    pub fn distance(&self) -> T {
        self.lambda
            .iter()
            .map(|v| v.ln().powi(2))
            .fold(T::zero(), |a, b| a + b)
            .sqrt()
    }

    /// `A₁^{1/2} U diag(λ^s) ` for the given exponent; `B Bᵀ = φ(2s)`.
    fn half_factor(&self, s: T) -> DMatrix<T> {
        let mut b = self.sqrt_a1.as_matrix() * &self.u;
        for (j, mut col) in b.column_iter_mut().enumerate() {
            col *= self.lambda[j].powf(s);
        }
        b
    }

    /// `φ(t) = A₁^{1/2} U Λᵗ Uᵀ A₁^{1/2}`.
    pub fn point(&self, t: T) -> SpdMatrix<T> {
        SpdMatrix::from_trusted(gram(&self.half_factor(t * T::lit(0.5))))
    }

    /// Whitened geodesic `R(t) = U Λᵗ Uᵀ`.
    pub fn whitened_power(&self, t: T) -> SpdMatrix<T> {
        let mut b = self.u.clone();
        for (j, mut col) in b.column_iter_mut().enumerate() {
            col *= self.lambda[j].powf(t * T::lit(0.5));
        }
        SpdMatrix::from_trusted(gram(&b))
    }

    /// `A₁^{-1/2} X A₁^{-1/2}`.
    pub fn whiten(&self, x: &DMatrix<T>) -> DMatrix<T> {
        let mut w = self.inv_sqrt_a1.as_matrix() * x * self.inv_sqrt_a1.as_matrix();
        symmetrize_in_place(&mut w);
        w
    }

    /// `‖UᵀU − I‖_max`.
    pub fn orthogonality_error(&self) -> T {
        let n = self.dim();
        max_abs(&(self.u.transpose() * &self.u - DMatrix::identity(n, n)))
    }

    /// Relative Frobenius error of `A₁^{1/2} U Λ Uᵀ A₁^{1/2}` against `a2`.
    pub fn reconstruction_error(&self, a2: &SpdMatrix<T>) -> T {
        relative_frobenius(self.point(T::one()).as_matrix(), a2.as_matrix())
    }

    /// True when all generalized eigenvalues coincide, i.e. `A₂ = αA₁`.
    pub fn is_scaling(&self) -> bool {
        let hi = self.lambda[0].ln();
        let lo = self.lambda[self.dim() - 1].ln();
        let spread = (hi - lo).abs();
        spread <= T::lit(T::RECON_TOL) * (T::one() + hi.abs().max(lo.abs()))
    }
}

/// `d(A₁, A₂) = sqrt(Σ log² λ_k)` over the pencil `(A₂, A₁)`.
pub fn natural_distance<T: Real>(a1: &SpdMatrix<T>, a2: &SpdMatrix<T>) -> Result<T> {
    if a1.as_matrix() == a2.as_matrix() {
        return Ok(T::zero());
    }
    let lambda = generalized_eigenvalues(a1, a2)?;
    Ok(lambda
        .iter()
        .map(|v| v.ln().powi(2))
        .fold(T::zero(), |a, b| a + b)
        .sqrt())
}

/// Point at parameter `t` on the geodesic described by `pd`.
pub fn geodesic_point<T: Real>(pd: &PencilDecomposition<T>, t: T) -> SpdMatrix<T> {
    pd.point(t)
}

/// Riemannian logarithm `log_A(B)`.
pub fn log_map<T: Real>(base: &SpdMatrix<T>, b: &SpdMatrix<T>) -> Result<SymMatrix<T>> {
    check_dims(base.dim(), b.dim())?;
    let SymSqrt { sqrt, inv_sqrt } = sym_sqrt(base)?;
    let mut w = inv_sqrt.as_matrix() * b.as_matrix() * inv_sqrt.as_matrix();
    symmetrize_in_place(&mut w);
    let log_w = SymEigen::new(&w).map(|v| v.ln());
    Ok(SymMatrix::from_trusted(
        sqrt.as_matrix() * log_w * sqrt.as_matrix(),
    ))
}

/// Riemannian exponential `exp_A(X)`.
pub fn exp_map<T: Real>(base: &SpdMatrix<T>, x: &SymMatrix<T>) -> Result<SpdMatrix<T>> {
    check_dims(base.dim(), x.dim())?;
    let SymSqrt { sqrt, inv_sqrt } = sym_sqrt(base)?;
    let mut w = inv_sqrt.as_matrix() * x.as_matrix() * inv_sqrt.as_matrix();
    symmetrize_in_place(&mut w);
    let eig = SymEigen::new(&w);
    let mut b = sqrt.as_matrix() * &eig.vectors;
    for (j, mut col) in b.column_iter_mut().enumerate() {
        col *= (eig.values[j] * T::lit(0.5)).exp();
    }
    Ok(SpdMatrix::from_trusted(gram(&b)))
}

/// `g_A(X, Y) = Tr(X A⁻¹ Y A⁻¹)`.
pub fn metric_inner<T: Real>(base: &SpdMatrix<T>, x: &SymMatrix<T>, y: &SymMatrix<T>) -> Result<T> {
    check_dims(base.dim(), x.dim())?;
    check_dims(base.dim(), y.dim())?;
    let ax = base.solve(x.as_matrix());
    let ay = base.solve(y.as_matrix());
    Ok(trace_product(&ax, &ay))
}
