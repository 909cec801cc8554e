use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::config::AquiferConfig;
use crate::error::{AquiferError, Result};

/// Sampler for the log-permeability `g` on the staggered grid: FD nodes and
/// the midpoints between them, drawn jointly.
///
/// Draws are exact for the Gram matrix plus `1e−10·σ²` on the diagonal:
/// `g = μ + F z + √jitter · w` with `F` the eigen-factor of the Gram matrix
/// restricted to modes above round-off, and `w` white noise.
#[derive(Clone, Debug)]
pub struct GpSampler {
    mean: f64,
    nodes: usize,
    jitter_std: f64,
    factor: DMatrix<f64>,
    /// rows of `factor` belonging to midpoints
    factor_mid: DMatrix<f64>,
}

pub const JITTER: f64 = 1e-10;

impl GpSampler {
    pub fn new(cfg: &AquiferConfig) -> Result<Self> {
        cfg.validate()?;
        let nodes = cfg.grid_nodes;
        let m = 2 * nodes - 1;
        let h = cfg.dx() / 2.0;
        let kernel = cfg.kernel;
        let jitter = JITTER * kernel.sigma2;
        let gram = DMatrix::from_fn(m, m, |i, j| kernel.eval((i as f64 - j as f64) * h));
        let eig = gram.symmetric_eigen();
        let roundoff = m as f64 * f64::EPSILON * eig.eigenvalues.amax();
        let min = eig.eigenvalues.min();
        if min + jitter < -roundoff {
            return Err(AquiferError::Config(format!(
                "kernel Gram matrix is not positive definite after jitter (eigenvalue {min:e})"
            )));
        }
        let keep: Vec<usize> = (0..m).filter(|&k| eig.eigenvalues[k] > roundoff).collect();
        let factor = DMatrix::from_fn(m, keep.len(), |i, c| {
            let k = keep[c];
            eig.eigenvectors[(i, k)] * eig.eigenvalues[k].sqrt()
        });
        let factor_mid = DMatrix::from_fn(nodes - 1, keep.len(), |i, c| factor[(2 * i + 1, c)]);
        Ok(Self {
            mean: cfg.gp_mean,
            nodes,
            jitter_std: jitter.sqrt(),
            factor,
            factor_mid,
        })
    }

    /// Number of retained kernel modes.
    pub fn rank(&self) -> usize {
        self.factor.ncols()
    }

    fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> (DVector<f64>, DVector<f64>) {
        let z = DVector::from_fn(self.rank(), |_, _| rng.sample(StandardNormal));
        let w = DVector::from_fn(2 * self.nodes - 1, |_, _| {
            self.jitter_std * rng.sample::<f64, _>(StandardNormal)
        });
        (z, w)
    }

    /// One joint draw on the staggered grid: even entries are nodes, odd
    /// entries midpoints.
    pub fn sample_staggered<R: Rng + ?Sized>(&self, rng: &mut R) -> DVector<f64> {
        let (z, w) = self.draw(rng);
        (&self.factor * z + w).add_scalar(self.mean)
    }

    /// Log-permeability at the midpoints only, consuming the same random
    /// numbers as [`GpSampler::sample_staggered`].
    pub fn sample_midpoints<R: Rng + ?Sized>(&self, rng: &mut R) -> DVector<f64> {
        let (z, w) = self.draw(rng);
        let mut g = &self.factor_mid * z;
        for (i, v) in g.iter_mut().enumerate() {
            *v += self.mean + w[2 * i + 1];
        }
        g
    }

    pub fn node_count(&self) -> usize {
        self.nodes
    }
}

/// One draw of `g` at the FD nodes.
pub fn sample_log_permeability<R: Rng + ?Sized>(
    cfg: &AquiferConfig,
    rng: &mut R,
) -> Result<DVector<f64>> {
    let s = GpSampler::new(cfg)?.sample_staggered(rng);
    Ok(DVector::from_fn(cfg.grid_nodes, |i, _| s[2 * i]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::Kernel;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn tiny_variance_is_constant() {
        let cfg = AquiferConfig::default().with_kernel(Kernel::new(1e-14, 20.0));
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let g = sample_log_permeability(&cfg, &mut rng).unwrap();
        assert!(g.iter().all(|v| (v - 1.0).abs() < 1e-5));
    }

    #[test]
    fn midpoints_match_staggered() {
        let cfg = AquiferConfig::default();
        let s = GpSampler::new(&cfg).unwrap();
        let full = s.sample_staggered(&mut ChaCha8Rng::seed_from_u64(3));
        let mid = s.sample_midpoints(&mut ChaCha8Rng::seed_from_u64(3));
        for i in 0..mid.len() {
            assert!((full[2 * i + 1] - mid[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn truncation_keeps_a_thin_factor() {
        let s = GpSampler::new(&AquiferConfig::default()).unwrap();
        assert!(s.rank() > 5 && s.rank() < 60, "rank {}", s.rank());
    }
}
