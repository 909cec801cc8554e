//! Estimation within a one-parameter geodesic family.
//!
//! All three estimators reduce, after whitening by the anchor pencil, to
//! convex problems in `t` that only involve `Z = Uᵀ A₁^{-1/2} Ĉ A₁^{-1/2} U`
//! and `Λ`:
//!
//! * natural projection minimizes `d²(φ(t), Ĉ) = Σ log² eig(Λ^{-t/2} Z Λ^{-t/2})`,
//! * reverse I-projection minimizes `KL(N(0,Ĉ) ‖ N(0,φ(t)))`,
//! * I-projection minimizes `KL(N(0,φ(t)) ‖ N(0,Ĉ))`.
//!
//! Derivatives are reported for the spectral loss actually differentiated:
//! the squared distance for the natural projection and twice the divergence
//! for the two KL projections. With that scaling the second derivatives are
//! `Tr(ZΛ^{-t} L²)` and `Tr(Λᵗ Z⁻¹ L²)` with `L = log Λ`.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use serde::ser::SerializeStruct;
use serde::{Deserialize, Serialize, Serializer};

use crate::error::{GeoError, Result};
use crate::family::GeodesicSegment;
use crate::linalg::{jacobi_singular_values, symmetrize_in_place, SymEigen};
use crate::manifold::{
    check_dims, generalized_eigenvalues, log_map, metric_inner, natural_distance,
    PencilDecomposition, SpdMatrix, SymMatrix,
};
use crate::scalar::Real;

/// Projection method.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "natural")]
    Natural,
    /// `argmin_t KL(N(0,Ĉ) ‖ N(0,φ(t)))`, equivalently the Gaussian MLE.
    #[serde(rename = "reverseI")]
    ReverseI,
    /// `argmin_t KL(N(0,φ(t)) ‖ N(0,Ĉ))`.
    #[serde(rename = "iproj")]
    IProj,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::Natural, Method::ReverseI, Method::IProj];

    pub fn name(self) -> &'static str {
        match self {
            Method::Natural => "natural",
            Method::ReverseI => "reverseI",
            Method::IProj => "iproj",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = GeoError;

    /// Accepts the canonical names plus `mle` for the reverse I-projection.
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "natural" => Ok(Method::Natural),
            "reverseI" | "reversei" | "mle" => Ok(Method::ReverseI),
            "iproj" => Ok(Method::IProj),
            other => Err(GeoError::InvalidArgument(format!(
                "unknown method {other:?}"
            ))),
        }
    }
}

/// Normalization used to form a sample covariance.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CovarianceConvention {
    /// mean subtracted, divided by `q − 1`
    #[default]
    Centered,
    /// zero mean assumed, divided by `q`
    Uncentered,
}

/// Full-rank sample covariance together with how it was formed.
#[derive(Clone, Debug)]
pub struct SampleCovariance<T: Real> {
    matrix: SpdMatrix<T>,
    sample_count: usize,
    convention: CovarianceConvention,
}

impl<T: Real> SampleCovariance<T> {
    /// Forms the sample covariance of `samples` (one n-vector each).
    ///
    /// Fails with [`GeoError::RankDeficient`] when the result is singular,
    /// which always happens for `q ≤ n` centered or `q < n` uncentered.
    pub fn from_samples(samples: &[DVector<T>], convention: CovarianceConvention) -> Result<Self> {
        let q = samples.len();
        let min_q = match convention {
            CovarianceConvention::Centered => 2,
            CovarianceConvention::Uncentered => 1,
        };
        if q < min_q {
            return Err(GeoError::InvalidArgument(format!(
                "{q} samples are not enough for a {convention:?} covariance"
            )));
        }
        let n = samples[0].len();
        for s in samples {
            check_dims(n, s.len())?;
        }
        let mut mean = DVector::zeros(n);
        if convention == CovarianceConvention::Centered {
            for s in samples {
                mean += s;
            }
            mean /= T::from_usize(q).unwrap();
        }
        let mut acc = DMatrix::zeros(n, n);
        for s in samples {
            let d = s - &mean;
            acc.ger(T::one(), &d, &d, T::one());
        }
        let denom = match convention {
            CovarianceConvention::Centered => q - 1,
            CovarianceConvention::Uncentered => q,
        };
        acc /= T::from_usize(denom).unwrap();
        symmetrize_in_place(&mut acc);
        let matrix = match SpdMatrix::new(acc) {
            Ok(m) => m,
            Err(GeoError::NotPositiveDefinite { eigenvalue, .. }) => {
                return Err(GeoError::RankDeficient {
                    eigenvalue,
                    samples: q,
                    dim: n,
                })
            }
            Err(e) => return Err(e),
        };
        Ok(Self {
            matrix,
            sample_count: q,
            convention,
        })
    }

    /// Wraps an already formed covariance.
    pub fn from_matrix(
        matrix: SpdMatrix<T>,
        sample_count: usize,
        convention: CovarianceConvention,
    ) -> Self {
        Self {
            matrix,
            sample_count,
            convention,
        }
    }

    pub fn matrix(&self) -> &SpdMatrix<T> {
        &self.matrix
    }

    pub fn sample_count(&self) -> usize {
        self.sample_count
    }

    pub fn convention(&self) -> CovarianceConvention {
        self.convention
    }
}

/// `Ĉ` expressed in the eigenbasis of the whitened anchor pencil.
#[derive(Clone, Debug)]
pub struct WhiteningContext<T: Real> {
    pub pencil: PencilDecomposition<T>,
    /// `Uᵀ A₁^{-1/2} Ĉ A₁^{-1/2} U`
    pub z: DMatrix<T>,
    /// `Z⁻¹ = Uᵀ A₁^{1/2} Ĉ⁻¹ A₁^{1/2} U`
    pub z_inv: DMatrix<T>,
    /// `Ĉ^{-1/2} A₁^{1/2} U`, so that `MᵀM = Z⁻¹`
    pub m: DMatrix<T>,
    pub log_lambda: DVector<T>,
    pub log_det_z: T,
}

impl<T: Real> WhiteningContext<T> {
    pub fn new(pencil: &PencilDecomposition<T>, c: &SpdMatrix<T>) -> Result<Self> {
        check_dims(pencil.dim(), c.dim())?;
        let mut z = pencil.u.transpose() * pencil.whiten(c.as_matrix()) * &pencil.u;
        symmetrize_in_place(&mut z);
        let z_spd = SpdMatrix::new(z.clone())?;
        let z_inv = z_spd.inverse().into_matrix();
        let c_inv_sqrt = c.eigen().map(|v| T::one() / v.sqrt());
        let m = c_inv_sqrt * pencil.sqrt_a1.as_matrix() * &pencil.u;
        Ok(Self {
            log_lambda: pencil.log_lambda(),
            log_det_z: z_spd.log_det(),
            pencil: pencil.clone(),
            z,
            z_inv,
            m,
        })
    }

    pub fn dim(&self) -> usize {
        self.z.nrows()
    }

    /// `Tr(L²) = d²(A₁, A₂)`.
    pub fn scale(&self) -> T {
        self.log_lambda.iter().fold(T::zero(), |a, &l| a + l * l)
    }

    /// `Λ^{-t/2} Z Λ^{-t/2}`.
    fn whitened_at(&self, t: T) -> DMatrix<T> {
        let half = T::lit(-0.5) * t;
        let s: Vec<T> = self.log_lambda.iter().map(|&l| (half * l).exp()).collect();
        let n = self.dim();
        let mut w = DMatrix::from_fn(n, n, |i, j| s[i] * self.z[(i, j)] * s[j]);
        symmetrize_in_place(&mut w);
        w
    }

    /// Spectral loss and its first two derivatives at `t`.
    pub fn derivatives(&self, method: Method, t: T) -> ObjectiveDerivatives<T> {
        let l = &self.log_lambda;
        let n = self.dim();
        match method {
            Method::Natural => {
                let eig = SymEigen::new(&self.whitened_at(t));
                let logs: Vec<T> = eig.values.iter().map(|v| v.ln()).collect();
                let value = logs.iter().fold(T::zero(), |a, &x| a + x * x);
                // M = Vᵀ L V
                let mut lv = eig.vectors.clone();
                for (i, mut row) in lv.row_iter_mut().enumerate() {
                    row *= l[i];
                }
                let mm = eig.vectors.transpose() * lv;
                let mut first = T::zero();
                let mut second = T::zero();
                for i in 0..n {
                    first += logs[i] * mm[(i, i)];
                    for j in 0..n {
                        second += log_mean_weight(logs[i] - logs[j]) * mm[(i, j)] * mm[(i, j)];
                    }
                }
                ObjectiveDerivatives {
                    value,
                    first: T::lit(-2.0) * first,
                    second,
                }
            }
            Method::ReverseI => {
                let mut tr = T::zero();
                let mut d1 = T::zero();
                let mut d2 = T::zero();
                let mut sum_l = T::zero();
                for k in 0..n {
                    let w = self.z[(k, k)] * (-t * l[k]).exp();
                    tr += w;
                    d1 += w * l[k];
                    d2 += w * l[k] * l[k];
                    sum_l += l[k];
                }
                let nn = T::from_usize(n).unwrap();
                ObjectiveDerivatives {
                    value: tr - nn + t * sum_l - self.log_det_z,
                    first: sum_l - d1,
                    second: d2,
                }
            }
            Method::IProj => {
                let mut tr = T::zero();
                let mut d1 = T::zero();
                let mut d2 = T::zero();
                let mut sum_l = T::zero();
                for k in 0..n {
                    let w = self.z_inv[(k, k)] * (t * l[k]).exp();
                    tr += w;
                    d1 += w * l[k];
                    d2 += w * l[k] * l[k];
                    sum_l += l[k];
                }
                let nn = T::from_usize(n).unwrap();
                ObjectiveDerivatives {
                    value: tr - nn + self.log_det_z - t * sum_l,
                    first: d1 - sum_l,
                    second: d2,
                }
            }
        }
    }

    /// Left side of the method's optimality equation at `t`:
    /// `Tr(log(ZΛ^{-t}) L)`, `Tr((ZΛ^{-t} − I) L)` or `Tr((ΛᵗZ⁻¹ − I) L)`.
    pub fn residual(&self, method: Method, t: T) -> T {
        let d = self.derivatives(method, t);
        match method {
            Method::Natural => T::lit(-0.5) * d.first,
            Method::ReverseI => -d.first,
            Method::IProj => d.first,
        }
    }

    /// Value reported as `objective`: the distance for the natural
    /// projection, the divergence itself for the KL projections.
    /// `d(Ĉ, φ(t))` without forming `φ(t)`: the singular values of
    /// `Rᵀ Λ^{-t/2}` with `Z = R Rᵀ`, by one-sided Jacobi. Stays accurate
    /// far along the geodesic, where `φ(t)` itself is not representable.
    pub fn distance_at(&self, t: T) -> Result<T> {
        let chol =
            nalgebra::Cholesky::new(self.z.clone()).ok_or(GeoError::NotPositiveDefinite {
                eigenvalue: 0.0,
                threshold: 0.0,
            })?;
        let mut m = chol.l().transpose();
        let half = T::lit(-0.5) * t;
        for (j, mut col) in m.column_iter_mut().enumerate() {
            col *= (half * self.log_lambda[j]).exp();
        }
        let sv = jacobi_singular_values(m);
        let sum = sv.iter().fold(T::zero(), |acc, s| {
            let l = T::lit(2.0) * s.ln();
            acc + l * l
        });
        Ok(sum.sqrt())
    }

    fn reported_objective(&self, method: Method, t: T) -> T {
        let v = self.derivatives(method, t).value;
        match method {
            Method::Natural => v.max(T::zero()).sqrt(),
            _ => (v * T::lit(0.5)).max(T::zero()),
        }
    }
}

/// `x / tanh(x/2)`, the weight `(σᵢ + σⱼ)(log σᵢ − log σⱼ)/(σᵢ − σⱼ)` with
/// `x = log σᵢ − log σⱼ`; equals 2 at `x = 0`.
fn log_mean_weight<T: Real>(x: T) -> T {
    if x.abs() < T::lit(1e-4) {
        T::lit(2.0) + x * x / T::lit(6.0)
    } else {
        x / (x * T::lit(0.5)).tanh()
    }
}

/// Spectral loss value and derivatives in `t`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ObjectiveDerivatives<T> {
    pub value: T,
    pub first: T,
    pub second: T,
}

/// Outcome of a one-parameter projection.
#[derive(Clone, Debug)]
pub struct ProjectionResult<T: Real> {
    pub method: Method,
    pub t: T,
    pub projected: SpdMatrix<T>,
    pub objective: T,
    pub residual: T,
    pub iterations: usize,
}

impl<T: Real> Serialize for ProjectionResult<T> {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let mut s = serializer.serialize_struct("ProjectionResult", 5)?;
        s.serialize_field("method", &self.method)?;
        s.serialize_field("t", &self.t.as_f64())?;
        s.serialize_field("objective", &self.objective.as_f64())?;
        s.serialize_field("residual", &self.residual.as_f64())?;
        s.serialize_field("iterations", &self.iterations)?;
        s.end()
    }
}

/// Stopping rule of the one-dimensional solver.
#[derive(Clone, Copy, Debug)]
pub struct SolverOptions {
    /// bound on the final Newton step
    pub step_tol: f64,
    /// bound on `|f'|` relative to `Tr(L²)`
    pub grad_tol: f64,
    pub max_iter: usize,
}

impl SolverOptions {
    pub fn for_scalar<T: Real>() -> Self {
        Self {
            step_tol: T::SOLVER_TOL,
            grad_tol: T::SOLVER_TOL,
            max_iter: 200,
        }
    }
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self::for_scalar::<f64>()
    }
}

/// Minimizes a smooth strictly convex function of one variable given
/// `t ↦ (f'(t), f''(t))`. Returns the minimizer and the iteration count.
///
/// Starts from `t0` inside the bracket `[−1, 2]`, widened until `f'` changes
/// sign; Newton steps that leave the bracket are replaced by bisection.
pub(crate) fn newton_bracketed<T: Real>(
    deriv: impl Fn(T) -> (T, T),
    t0: T,
    grad_scale: T,
    opts: &SolverOptions,
) -> Result<(T, usize)> {
    let step_tol = T::lit(opts.step_tol);
    let grad_tol = T::lit(opts.grad_tol) * grad_scale;
    let two = T::lit(2.0);

    let (mut lo, mut hi) = (T::lit(-1.0), T::lit(2.0));
    let mut expansions = 0;
    loop {
        let g_lo = deriv(lo).0;
        let g_hi = deriv(hi).0;
        if !g_lo.is_finite() || !g_hi.is_finite() {
            return Err(GeoError::NonConvergence {
                iterations: expansions,
                reason: "derivative overflow while bracketing".into(),
            });
        }
        if g_lo <= T::zero() && g_hi >= T::zero() {
            break;
        }
        expansions += 1;
        if expansions > 60 {
            return Err(GeoError::NonConvergence {
                iterations: expansions,
                reason: "no sign change of the derivative; the minimum is not attained".into(),
            });
        }
        let w = hi - lo;
        if g_lo > T::zero() {
            hi = lo;
            lo -= two * w;
        } else {
            lo = hi;
            hi += two * w;
        }
    }

    let mut t = if t0 > lo && t0 < hi {
        t0
    } else {
        (lo + hi) * T::lit(0.5)
    };
    for iter in 1..=opts.max_iter {
        let (g, h) = deriv(t);
        if !g.is_finite() || !h.is_finite() {
            return Err(GeoError::NonConvergence {
                iterations: iter,
                reason: "non-finite derivative".into(),
            });
        }
        if g == T::zero() {
            return Ok((t, iter));
        }
        if g > T::zero() {
            hi = t;
        } else {
            lo = t;
        }
        let newton = if h > T::zero() {
            t - g / h
        } else {
            T::lit(f64::NAN)
        };
        if g.abs() <= grad_tol && (t - newton).abs() <= step_tol {
            return Ok((newton.max(lo).min(hi), iter));
        }
        let next = if newton > lo && newton < hi {
            newton
        } else {
            (lo + hi) * T::lit(0.5)
        };
        if hi - lo <= T::default_epsilon() * T::lit(4.0) * (T::one() + t.abs()) {
            return Ok((next, iter));
        }
        t = next;
    }
    Err(GeoError::NonConvergence {
        iterations: opts.max_iter,
        reason: "one-dimensional projection solver hit the iteration cap".into(),
    })
}

fn check_nondegenerate<T: Real>(seg: &GeodesicSegment<T>) -> Result<()> {
    if seg.length() <= T::lit(T::PD_TOL) {
        return Err(GeoError::DegenerateFamily(
            "anchors coincide, so the family is a single point".into(),
        ));
    }
    Ok(())
}

/// Projects `c` onto the family with the given method and solver options.
pub fn project_with<T: Real>(
    method: Method,
    seg: &GeodesicSegment<T>,
    c: &SpdMatrix<T>,
    opts: &SolverOptions,
) -> Result<ProjectionResult<T>> {
    check_nondegenerate(seg)?;
    let ctx = WhiteningContext::new(seg.pencil(), c)?;
    let (t, iterations) = if method == Method::Natural && seg.pencil().is_scaling() {
        (ctx.log_det_z / ctx.log_lambda.sum(), 0)
    } else {
        let guess = ctx.log_det_z / ctx.log_lambda.sum();
        let guess = if guess.is_finite() { guess } else { T::zero() };
        newton_bracketed(
            |t| {
                let d = ctx.derivatives(method, t);
                (d.first, d.second)
            },
            guess,
            ctx.scale(),
            opts,
        )?
    };
    Ok(ProjectionResult {
        method,
        t,
        projected: seg.eval(t),
        objective: ctx.reported_objective(method, t),
        residual: ctx.residual(method, t),
        iterations,
    })
}

/// Projects `c` onto the family with default solver options.
pub fn project<T: Real>(
    method: Method,
    seg: &GeodesicSegment<T>,
    c: &SpdMatrix<T>,
) -> Result<ProjectionResult<T>> {
    project_with(method, seg, c, &SolverOptions::for_scalar::<T>())
}

/// `argmin_t d(φ(t), Ĉ)`.
pub fn natural_projection<T: Real>(
    seg: &GeodesicSegment<T>,
    c: &SpdMatrix<T>,
) -> Result<ProjectionResult<T>> {
    project(Method::Natural, seg, c)
}

/// `argmin_t KL(N(0,Ĉ) ‖ N(0,φ(t)))`.
pub fn reverse_iprojection<T: Real>(
    seg: &GeodesicSegment<T>,
    c: &SpdMatrix<T>,
) -> Result<ProjectionResult<T>> {
    project(Method::ReverseI, seg, c)
}

/// `argmin_t KL(N(0,φ(t)) ‖ N(0,Ĉ))`.
pub fn iprojection<T: Real>(
    seg: &GeodesicSegment<T>,
    c: &SpdMatrix<T>,
) -> Result<ProjectionResult<T>> {
    project(Method::IProj, seg, c)
}

/// `d(C, φ(t))` evaluated in the eigenbasis of the anchor pencil, accurate
/// for `t` far outside `[0, 1]`.
pub fn distance_to_geodesic_point<T: Real>(
    seg: &GeodesicSegment<T>,
    c: &SpdMatrix<T>,
    t: T,
) -> Result<T> {
    WhiteningContext::new(seg.pencil(), c)?.distance_at(t)
}

/// Zero-mean Gaussian maximum likelihood along the family, straight from
/// the samples; the sample covariance may be singular.
///
/// `objective` is the mean negative log-likelihood per sample and `residual`
/// is `q Tr(L) − Σᵢ wᵢᵀ Λ^{-t} L wᵢ` with `wᵢ = Uᵀ A₁^{-1/2} yᵢ`.
pub fn gaussian_mle_from_data<T: Real>(
    seg: &GeodesicSegment<T>,
    samples: &[DVector<T>],
) -> Result<ProjectionResult<T>> {
    if samples.is_empty() {
        return Err(GeoError::InvalidArgument("no samples".into()));
    }
    check_nondegenerate(seg)?;
    let pd = seg.pencil();
    let n = pd.dim();
    let rot = pd.u.transpose() * pd.inv_sqrt_a1.as_matrix();
    let mut s = DVector::<T>::zeros(n);
    for y in samples {
        check_dims(n, y.len())?;
        let w = &rot * y;
        s += w.component_mul(&w);
    }
    let q = T::from_usize(samples.len()).unwrap();
    s /= q;
    let l = pd.log_lambda();
    let sum_l = l.sum();
    let deriv = |t: T| {
        let mut d1 = T::zero();
        let mut d2 = T::zero();
        for k in 0..n {
            let w = s[k] * (-t * l[k]).exp();
            d1 += w * l[k];
            d2 += w * l[k] * l[k];
        }
        (sum_l - d1, d2)
    };
    let scale = l.iter().fold(T::zero(), |a, &v| a + v * v);
    let (t, iterations) =
        newton_bracketed(deriv, T::zero(), scale, &SolverOptions::for_scalar::<T>())?;
    let quad = (0..n).fold(T::zero(), |a, k| a + s[k] * (-t * l[k]).exp());
    let two_pi = T::two_pi();
    let nn = T::from_usize(n).unwrap();
    let objective =
        T::lit(0.5) * (nn * two_pi.ln() + pd.sqrt_a1.log_det() * T::lit(2.0) + t * sum_l + quad);
    Ok(ProjectionResult {
        method: Method::ReverseI,
        t,
        projected: seg.eval(t),
        objective,
        residual: deriv(t).0 * q,
        iterations,
    })
}

/// `KL(N(0, c1) ‖ N(0, c2)) = Σ (λ⁻¹ + log λ − 1)/2` over the eigenvalues
/// `λ` of `c1^{-1/2} c2 c1^{-1/2}`. Swap the arguments for the other direction.
pub fn kl_gaussian<T: Real>(c1: &SpdMatrix<T>, c2: &SpdMatrix<T>) -> Result<T> {
    let lambda = generalized_eigenvalues(c1, c2)?;
    let sum = lambda
        .iter()
        .fold(T::zero(), |a, &v| a + (T::one() / v + v.ln() - T::one()));
    Ok((sum * T::lit(0.5)).max(T::zero()))
}

/// Spectral loss and derivatives of `method` at `t`.
pub fn objective_derivatives<T: Real>(
    method: Method,
    seg: &GeodesicSegment<T>,
    c: &SpdMatrix<T>,
    t: T,
) -> Result<ObjectiveDerivatives<T>> {
    Ok(WhiteningContext::new(seg.pencil(), c)?.derivatives(method, t))
}

/// Orthogonality condition of `method` evaluated with the manifold metric at
/// `R(t) = U Λᵗ Uᵀ`, with `W = A₁^{-1/2} Ĉ A₁^{-1/2}`:
///
/// * natural: `g_{R(t)}(log_{R(t)} W, log_{R(t)} R(1+t))`,
/// * reverse I: `g_{R(t)}(W − R(t), log_{R(t)} R(1+t))`,
/// * I-projection: `g_{R(−t)}(W⁻¹ − R(−t), log_{R(−t)} R(1−t))`.
///
/// Each equals the corresponding optimality residual.
pub fn orthogonality_residual<T: Real>(
    method: Method,
    seg: &GeodesicSegment<T>,
    c: &SpdMatrix<T>,
    t: T,
) -> Result<T> {
    let pd = seg.pencil();
    check_dims(pd.dim(), c.dim())?;
    let w = SpdMatrix::new(pd.whiten(c.as_matrix()))?;
    match method {
        Method::Natural => {
            let r = pd.whitened_power(t);
            let x = log_map(&r, &w)?;
            let y = log_map(&r, &pd.whitened_power(T::one() + t))?;
            metric_inner(&r, &x, &y)
        }
        Method::ReverseI => {
            let r = pd.whitened_power(t);
            let x = SymMatrix::new(w.as_matrix() - r.as_matrix())?;
            let y = log_map(&r, &pd.whitened_power(T::one() + t))?;
            metric_inner(&r, &x, &y)
        }
        Method::IProj => {
            let r = pd.whitened_power(-t);
            let x = SymMatrix::new(w.inverse().as_matrix() - r.as_matrix())?;
            let y = log_map(&r, &pd.whitened_power(T::one() - t))?;
            metric_inner(&r, &x, &y)
        }
    }
}

/// Determinant formula `(log det Ĉ − log det A₁)/(log det A₂ − log det A₁)`.
///
/// Returns `Some(t)` when it is exact: `Ĉ` lies on the family at `t`, or the
/// anchors are proportional (then it is the natural projection for any `Ĉ`).
/// Returns `None` otherwise.
pub fn closed_form_t<T: Real>(seg: &GeodesicSegment<T>, c: &SpdMatrix<T>) -> Result<Option<T>> {
    let pd = seg.pencil();
    check_dims(pd.dim(), c.dim())?;
    let denom = seg.anchor2().log_det() - seg.anchor1().log_det();
    if denom.abs() <= T::lit(T::RECON_TOL) * (T::one() + seg.length()) {
        return Err(GeoError::DegenerateFamily(
            "anchors share a log-determinant; the determinant formula is undefined".into(),
        ));
    }
    let t = (c.log_det() - seg.anchor1().log_det()) / denom;
    if pd.is_scaling() {
        return Ok(Some(t));
    }
    let d = natural_distance(&seg.eval(t), c)?;
    Ok((d <= T::lit(T::RECON_TOL) * (T::one() + seg.length())).then_some(t))
}

/// `exp_{A₁}(X⊥)`, where `X⊥` is the tangent vector `x` at `A₁` with its
/// component along the geodesic towards `A₂` removed. `A₁` is then the
/// natural projection of the result onto `(A₁, A₂)`.
pub fn orthogonal_offset<T: Real>(
    a1: &SpdMatrix<T>,
    a2: &SpdMatrix<T>,
    x: &SymMatrix<T>,
) -> Result<SpdMatrix<T>> {
    check_dims(a1.dim(), x.dim())?;
    let pd = crate::manifold::pencil_decompose(a1, a2)?;
    let g = pd.whiten(x.as_matrix());
    let dir = SymEigen::new(&pd.whiten(a2.as_matrix())).map(|v| v.ln());
    let norm2 = dir.norm_squared();
    if norm2 <= T::lit(T::PD_TOL) {
        return Err(GeoError::DegenerateFamily("anchors coincide".into()));
    }
    let coef = g.component_mul(&dir).sum() / norm2;
    let mut perp = g - dir * coef;
    symmetrize_in_place(&mut perp);
    let e = SymEigen::new(&perp);
    let mut b = pd.sqrt_a1.as_matrix() * &e.vectors;
    for (j, mut col) in b.column_iter_mut().enumerate() {
        col *= (e.values[j] * T::lit(0.5)).exp();
    }
    SpdMatrix::new(crate::linalg::gram(&b))
}

/// Local comparison of the three projections near the anchor `A₁`.
#[derive(Clone, Debug, Serialize)]
pub struct LocalAnalysisResult {
    pub epsilons: Vec<f64>,
    /// natural projection `t*(ε)`, zero by construction
    pub t_star: Vec<f64>,
    /// `t̂(ε) − t*(ε)`
    pub delta_hat: Vec<f64>,
    /// `ť(ε) − t*(ε)`
    pub delta_check: Vec<f64>,
    /// analytic second derivative of `t̂ − t*` at `ε = 0`
    pub hat_second_deriv: f64,
}

/// For each `ε`, projects `C_ε = φ_{A₁→Ĉ}(ε)` with `Ĉ = φ_{A₁→C}(1/d(A₁,C))`
/// by all three methods.
///
/// Requires that `A₁` is the natural projection of `C` onto `(A₁, A₂)`; the
/// analytic curvature is `Tr(log²(A₁^{-1/2}ĈA₁^{-1/2}) log(A₁^{-1/2}A₂A₁^{-1/2})) / d²(A₁,A₂)`.
pub fn local_analysis<T: Real>(
    a1: &SpdMatrix<T>,
    a2: &SpdMatrix<T>,
    c: &SpdMatrix<T>,
    epsilons: &[T],
) -> Result<LocalAnalysisResult> {
    let seg = GeodesicSegment::new(a1.clone(), a2.clone())?;
    let base = natural_projection(&seg, c)?;
    if base.t.abs() > T::lit(1e-6).max(T::lit(T::SOLVER_TOL) * T::lit(1e3)) {
        return Err(GeoError::Precondition(format!(
            "A1 must be the natural projection of C onto the family, but t* = {:e}",
            base.t.as_f64()
        )));
    }
    let to_c = GeodesicSegment::new(a1.clone(), c.clone())?;
    let dist = to_c.length();
    if dist <= T::lit(T::PD_TOL) {
        return Err(GeoError::Precondition("C coincides with A1".into()));
    }
    let c_unit = to_c.eval(T::one() / dist);
    let toward = GeodesicSegment::new(a1.clone(), c_unit.clone())?;

    let pd = seg.pencil();
    let g = SymEigen::new(&pd.whiten(c_unit.as_matrix())).map(|v| v.ln());
    let log_a2 = SymEigen::new(&pd.whiten(a2.as_matrix())).map(|v| v.ln());
    let num = (&g * &g).component_mul(&log_a2).sum();
    let hat_second_deriv = (num / (seg.length() * seg.length())).as_f64();

    let mut out = LocalAnalysisResult {
        epsilons: Vec::with_capacity(epsilons.len()),
        t_star: Vec::with_capacity(epsilons.len()),
        delta_hat: Vec::with_capacity(epsilons.len()),
        delta_check: Vec::with_capacity(epsilons.len()),
        hat_second_deriv,
    };
    for &eps in epsilons {
        let c_eps = toward.eval(eps);
        let ts = natural_projection(&seg, &c_eps)?.t;
        let th = reverse_iprojection(&seg, &c_eps)?.t;
        let tc = iprojection(&seg, &c_eps)?.t;
        out.epsilons.push(eps.as_f64());
        out.t_star.push(ts.as_f64());
        out.delta_hat.push((th - ts).as_f64());
        out.delta_check.push((tc - ts).as_f64());
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn diag(d: &[f64]) -> SpdMatrix<f64> {
        SpdMatrix::from_diagonal(d).unwrap()
    }

    fn spd(n: usize, seed: u64) -> SpdMatrix<f64> {
        let mut s = seed.wrapping_mul(0x9E3779B97F4A7C15) | 1;
        let b = DMatrix::from_fn(n, n, |_, _| {
            s ^= s << 13;
            s ^= s >> 7;
            s ^= s << 17;
            (s >> 11) as f64 / (1u64 << 53) as f64 - 0.5
        });
        SpdMatrix::new(&b * b.transpose() + DMatrix::identity(n, n) * 0.2).unwrap()
    }

    fn seg(a: SpdMatrix<f64>, b: SpdMatrix<f64>) -> GeodesicSegment<f64> {
        GeodesicSegment::new(a, b).unwrap()
    }

    #[test]
    fn idempotence_small() {
        let s = seg(spd(4, 1), spd(4, 2));
        let c = s.eval(0.37);
        for m in Method::ALL {
            let r = project(m, &s, &c).unwrap();
            assert_relative_eq!(r.t, 0.37, epsilon = 1e-10);
            assert!(r.objective.abs() < 1e-7, "{m}: {}", r.objective);
        }
        assert_relative_eq!(
            closed_form_t(&s, &c).unwrap().unwrap(),
            0.37,
            epsilon = 1e-10
        );
    }

    #[test]
    fn scaling_case_uses_determinant_formula() {
        let e = 1f64.exp();
        let s = seg(SpdMatrix::identity(2), diag(&[e, e]));
        let c = diag(&[e * e, e.powi(4)]);
        let r = natural_projection(&s, &c).unwrap();
        assert_relative_eq!(r.t, 3.0, epsilon = 1e-12);
        assert_eq!(r.iterations, 0);
        assert_relative_eq!(
            closed_form_t(&s, &c).unwrap().unwrap(),
            3.0,
            epsilon = 1e-12
        );

        let s = seg(SpdMatrix::identity(2), diag(&[4.0, 4.0]));
        assert_relative_eq!(
            closed_form_t(&s, &diag(&[2.0, 8.0])).unwrap().unwrap(),
            1.0,
            epsilon = 1e-12
        );
    }

    #[test]
    fn kl_projection_scalar_examples() {
        let s = seg(SpdMatrix::identity(2), diag(&[4.0, 1.0]));
        let c = diag(&[2.0, 1.0]);
        assert_relative_eq!(reverse_iprojection(&s, &c).unwrap().t, 0.5, epsilon = 1e-10);
        assert_relative_eq!(iprojection(&s, &c).unwrap().t, 0.5, epsilon = 1e-10);
        let d = objective_derivatives(Method::ReverseI, &s, &c, 0.0).unwrap();
        assert_relative_eq!(d.second, 2.0 * 4f64.ln().powi(2), epsilon = 1e-12);
    }

    #[test]
    fn degenerate_family_rejected() {
        let a = spd(3, 5);
        let s = seg(a.clone(), a.clone());
        assert!(matches!(
            natural_projection(&s, &spd(3, 6)),
            Err(GeoError::DegenerateFamily(_))
        ));
        assert!(matches!(
            closed_form_t(&s, &spd(3, 6)),
            Err(GeoError::DegenerateFamily(_))
        ));
    }

    #[test]
    fn closed_form_absent_off_family() {
        let s = seg(spd(3, 7), spd(3, 8));
        assert_eq!(closed_form_t(&s, &spd(3, 9)).unwrap(), None);
    }

    #[test]
    fn kl_examples() {
        let a = spd(3, 3);
        assert!(kl_gaussian(&a, &a).unwrap().abs() < 1e-14);
        let e = 1f64.exp();
        let v = kl_gaussian(&SpdMatrix::identity(1), &diag(&[e])).unwrap();
        assert_relative_eq!(v, 1.0 / (2.0 * e), epsilon = 1e-15);
        assert_relative_eq!(v, 0.18394, epsilon = 1e-5);
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let s = seg(spd(5, 11), spd(5, 12));
        let c = spd(5, 13);
        let ctx = WhiteningContext::new(s.pencil(), &c).unwrap();
        let h = 1e-5;
        for m in Method::ALL {
            for &t in &[-1.3, -0.2, 0.4, 1.1, 2.5] {
                let d = ctx.derivatives(m, t);
                let fp = ctx.derivatives(m, t + h);
                let fm = ctx.derivatives(m, t - h);
                let fd1 = (fp.value - fm.value) / (2.0 * h);
                let fd2 = (fp.first - fm.first) / (2.0 * h);
                assert_relative_eq!(d.first, fd1, max_relative = 1e-6, epsilon = 1e-8);
                assert_relative_eq!(d.second, fd2, max_relative = 1e-6);
                assert!(d.second > 0.0);
            }
        }
    }

    #[test]
    fn whitening_context_consistency() {
        let s = seg(spd(4, 21), spd(4, 22));
        let ctx = WhiteningContext::new(s.pencil(), &spd(4, 23)).unwrap();
        let mtm = ctx.m.transpose() * &ctx.m;
        assert!(crate::linalg::relative_frobenius(&mtm, &ctx.z_inv) < 1e-10);
    }

    #[test]
    fn residuals_vanish_at_optimum() {
        let s = seg(spd(6, 31), spd(6, 32));
        let c = spd(6, 33);
        let scale = s.length().powi(2);
        for m in Method::ALL {
            let r = project(m, &s, &c).unwrap();
            assert!(r.residual.abs() <= 1e-10 * scale, "{m}: {}", r.residual);
            let orth = orthogonality_residual(m, &s, &c, r.t).unwrap();
            assert!(orth.abs() <= 1e-8 * scale, "{m}: {orth}");
        }
    }

    #[test]
    fn mle_single_sample_closed_form() {
        let e = 1f64.exp();
        let s = seg(SpdMatrix::identity(2), diag(&[e, e]));
        let y = DVector::from_vec(vec![1.5, -0.5]);
        let r = gaussian_mle_from_data(&s, &[y.clone()]).unwrap();
        assert_relative_eq!(r.t, (y.norm_squared() / 2.0).ln(), epsilon = 1e-10);
        assert!(gaussian_mle_from_data::<f64>(&s, &[]).is_err());
    }

    #[test]
    fn sample_covariance_rank() {
        let samples: Vec<_> = (0..3)
            .map(|i| DVector::from_vec(vec![i as f64, 1.0, 2.0, -1.0]))
            .collect();
        assert!(matches!(
            SampleCovariance::from_samples(&samples, CovarianceConvention::Centered),
            Err(GeoError::RankDeficient {
                samples: 3,
                dim: 4,
                ..
            })
        ));
    }

    #[test]
    fn method_names_round_trip() {
        for m in Method::ALL {
            assert_eq!(m.name().parse::<Method>().unwrap(), m);
            assert_eq!(
                serde_json::to_string(&m).unwrap(),
                format!("\"{}\"", m.name())
            );
        }
        assert_eq!("mle".parse::<Method>().unwrap(), Method::ReverseI);
        assert!("bogus".parse::<Method>().is_err());
    }

    #[test]
    fn result_serializes_expected_fields() {
        let s = seg(spd(3, 41), spd(3, 42));
        let r = natural_projection(&s, &spd(3, 43)).unwrap();
        let v: serde_json::Value = serde_json::to_value(&r).unwrap();
        let keys: Vec<_> = v.as_object().unwrap().keys().cloned().collect();
        assert_eq!(keys.len(), 5);
        for k in ["method", "t", "objective", "residual", "iterations"] {
            assert!(v.get(k).is_some(), "{k}");
        }
    }

    #[test]
    fn f32_projection() {
        let a1 = SpdMatrix::<f32>::from_diagonal(&[1.0, 1.0]).unwrap();
        let a2 = SpdMatrix::<f32>::from_diagonal(&[4.0, 1.0]).unwrap();
        let s = GeodesicSegment::new(a1, a2).unwrap();
        let c = SpdMatrix::<f32>::from_diagonal(&[2.0, 1.0]).unwrap();
        let r = reverse_iprojection(&s, &c).unwrap();
        assert!((r.t - 0.5).abs() < 1e-4);
        let r = natural_projection(&s, &c).unwrap();
        assert!((r.t - 0.5).abs() < 1e-4);
    }
}
