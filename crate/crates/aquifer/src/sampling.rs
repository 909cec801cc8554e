//! Monte-Carlo estimation of the head covariance at the observation points.
//!
//! Random numbers come from ChaCha8 streams addressed by `(seed, domain,
//! index)`: the key `seed ^ domain·0x9E3779B97F4A7C15` seeds the generator
//! and `index` selects the stream. A Monte-Carlo run of `q` samples is cut
//! into fixed chunks of [`CHUNK`] samples, chunk `c` reading stream `c`, and
//! the chunk moments are merged in chunk order. Results therefore do not
//! depend on the number of threads.

use geocov::{CovarianceConvention, GeoError, SampleCovariance, SpdMatrix64};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::config::{AquiferConfig, NoiseSpec};
use crate::error::{AquiferError, Result};
use crate::gp::GpSampler;
use crate::solver::{observe_into, solve_into};

pub const CHUNK: usize = 4096;
/// Relative diagonal loading `τ·λ_max` applied to every assembled covariance.
///
/// Head covariances of smooth permeability fields have eigenvalues spread
/// over more than twelve decades, below what a double-precision
/// eigensolver resolves; the loading keeps every direction at least
/// `τ·λ_max` so pencils and distances stay well conditioned.
pub const COV_JITTER: f64 = 1e-10;
const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;
/// xor-ed into the domain of the matching noise streams
const NOISE_DOMAIN: u64 = 0x6E6F_6973_6500_0000;

pub fn stream_rng(seed: u64, domain: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(derived_seed(seed, domain));
    rng.set_stream(index);
    rng
}

pub fn derived_seed(seed: u64, domain: u64) -> u64 {
    seed ^ domain.wrapping_mul(GOLDEN)
}

/// Address of one Monte-Carlo run.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct StreamKey {
    pub seed: u64,
    pub domain: u64,
}

impl StreamKey {
    pub fn new(seed: u64, domain: u64) -> Self {
        Self { seed, domain }
    }

    pub fn derived_seed(&self) -> u64 {
        derived_seed(self.seed, self.domain)
    }
}

/// Sample mean and centered co-moment `Σ (x − x̄)(x − x̄)ᵀ`.
#[derive(Clone, Debug)]
pub struct Moments {
    pub count: usize,
    pub mean: DVector<f64>,
    pub comoment: DMatrix<f64>,
}

impl Moments {
    fn from_columns(x: &DMatrix<f64>) -> Self {
        let count = x.ncols();
        let mean = x.column_mean();
        let mut centered = x.clone();
        for mut c in centered.column_iter_mut() {
            c -= &mean;
        }
        let comoment = &centered * centered.transpose();
        Self {
            count,
            mean,
            comoment,
        }
    }

    /// Pairwise update of Chan, Golub and LeVeque.
    fn merge(self, other: Self) -> Self {
        let n = (self.count + other.count) as f64;
        let (na, nb) = (self.count as f64, other.count as f64);
        let delta = &other.mean - &self.mean;
        let mean = &self.mean + &delta * (nb / n);
        let comoment = self.comoment + other.comoment + &delta * delta.transpose() * (na * nb / n);
        Self {
            count: self.count + other.count,
            mean,
            comoment,
        }
    }

    /// Centered covariance with the `1/(q−1)` normalization.
    pub fn covariance(&self) -> DMatrix<f64> {
        let mut c = &self.comoment / (self.count as f64 - 1.0);
        c = (&c + c.transpose()) * 0.5;
        c
    }
}

/// A configured forward model: GP sampler, FD solver and observation map.
#[derive(Clone, Debug)]
pub struct HeadModel {
    cfg: AquiferConfig,
    sampler: GpSampler,
    obs_points: Vec<f64>,
}

impl HeadModel {
    pub fn new(cfg: &AquiferConfig) -> Result<Self> {
        Ok(Self {
            cfg: *cfg,
            sampler: GpSampler::new(cfg)?,
            obs_points: cfg.observation_points(),
        })
    }

    pub fn config(&self) -> &AquiferConfig {
        &self.cfg
    }

    pub fn sampler(&self) -> &GpSampler {
        &self.sampler
    }

    /// `count` observation vectors, one per column, from one stream pair.
    fn chunk(&self, key: StreamKey, index: u64, count: usize, noise_std: f64) -> DMatrix<f64> {
        let mut rng = stream_rng(key.seed, key.domain, index);
        let mut noise_rng = stream_rng(key.seed, key.domain ^ NOISE_DOMAIN, index);
        let n = self.cfg.n_obs;
        let mut out = DMatrix::zeros(n, count);
        let mut kappa = vec![0.0; self.cfg.grid_nodes - 1];
        let mut h = vec![0.0; self.cfg.grid_nodes];
        let mut work = Vec::new();
        for j in 0..count {
            let g = self.sampler.sample_midpoints(&mut rng);
            for (k, v) in kappa.iter_mut().zip(g.iter()) {
                *k = v.exp();
            }
            solve_into(&kappa, &self.cfg, &mut work, &mut h);
            let mut col = out.column_mut(j);
            observe_into(&h, &self.cfg, &self.obs_points, col.as_mut_slice());
            if noise_std > 0.0 {
                for v in col.iter_mut() {
                    let e: f64 = noise_rng.sample(StandardNormal);
                    *v += noise_std * e;
                }
            }
        }
        out
    }

    /// Mean and co-moment of `q` (optionally noisy) observation vectors.
    pub fn moments(&self, q: usize, key: StreamKey, noise: Option<&NoiseSpec>) -> Result<Moments> {
        if q < 2 {
            return Err(AquiferError::Config(format!(
                "at least 2 Monte-Carlo samples are needed, got {q}"
            )));
        }
        let noise_std = match noise {
            Some(ns) => {
                if ns.reference.dim() != self.cfg.n_obs {
                    return Err(GeoError::DimensionMismatch {
                        expected: self.cfg.n_obs,
                        found: ns.reference.dim(),
                    }
                    .into());
                }
                ns.std()
            }
            None => 0.0,
        };
        let chunks = q.div_ceil(CHUNK);
        let parts: Vec<Moments> = (0..chunks)
            .into_par_iter()
            .map(|c| {
                let count = CHUNK.min(q - c * CHUNK);
                Moments::from_columns(&self.chunk(key, c as u64, count, noise_std))
            })
            .collect();
        Ok(parts
            .into_iter()
            .reduce(Moments::merge)
            .expect("at least one chunk"))
    }

    /// Full-rank sample covariance of `q` head vectors.
    pub fn covariance(
        &self,
        q: usize,
        key: StreamKey,
        noise: Option<&NoiseSpec>,
    ) -> Result<SampleCovariance<f64>> {
        let n = self.cfg.n_obs;
        if q <= n {
            return Err(GeoError::RankDeficient {
                eigenvalue: 0.0,
                samples: q,
                dim: n,
            }
            .into());
        }
        let mut cov = self.moments(q, key, noise)?.covariance();
        load_diagonal(&mut cov);
        let m = match SpdMatrix64::new(cov) {
            Ok(m) => m,
            Err(GeoError::NotPositiveDefinite { eigenvalue, .. }) => {
                return Err(GeoError::RankDeficient {
                    eigenvalue,
                    samples: q,
                    dim: n,
                }
                .into())
            }
            Err(e) => return Err(e.into()),
        };
        Ok(SampleCovariance::from_matrix(
            m,
            q,
            CovarianceConvention::Centered,
        ))
    }
}

/// Adds `COV_JITTER · λ_max` to the diagonal.
pub fn load_diagonal(cov: &mut DMatrix<f64>) {
    let top = cov.clone().symmetric_eigen().eigenvalues.max();
    if top > 0.0 {
        for i in 0..cov.nrows() {
            cov[(i, i)] += COV_JITTER * top;
        }
    }
}

/// Covariance of the heads at the observation points from `q` Monte-Carlo
/// solves, with optional per-component observation noise.
pub fn monte_carlo_covariance(
    cfg: &AquiferConfig,
    q: usize,
    key: StreamKey,
    noise: Option<&NoiseSpec>,
) -> Result<SampleCovariance<f64>> {
    HeadModel::new(cfg)?.covariance(q, key, noise)
}
