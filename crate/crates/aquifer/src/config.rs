use geocov::SpdMatrix64;
use serde::{Deserialize, Serialize};

use crate::error::{AquiferError, Result};

/// Squared-exponential-type kernel `σ² exp(−(1/p)(|x−x′|/l)^p)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", default)]
pub struct Kernel {
    pub sigma2: f64,
    pub ell: f64,
    pub p: f64,
}

impl Default for Kernel {
    fn default() -> Self {
        Self {
            sigma2: 0.3,
            ell: 20.0,
            p: 2.0,
        }
    }
}

impl Kernel {
    pub fn new(sigma2: f64, ell: f64) -> Self {
        Self {
            sigma2,
            ell,
            ..Self::default()
        }
    }

    pub fn eval(&self, r: f64) -> f64 {
        self.sigma2 * (-(r.abs() / self.ell).powf(self.p) / self.p).exp()
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma2 > 0.0 && self.sigma2.is_finite()) {
            return Err(AquiferError::Config(format!(
                "kernel sigma2 must be positive, got {}",
                self.sigma2
            )));
        }
        if !(self.ell > 0.0 && self.ell.is_finite()) {
            return Err(AquiferError::Config(format!(
                "kernel ell must be positive, got {}",
                self.ell
            )));
        }
        if !(self.p > 0.0 && self.p <= 2.0) {
            return Err(AquiferError::Config(format!(
                "kernel exponent p must lie in (0, 2], got {}",
                self.p
            )));
        }
        Ok(())
    }
}

/// Geometry, boundary data and permeability model of the 1D aquifer
/// `(κ h′)′ + Q = 0`, `h(0) = H1`, `h(L) = H2`, `κ = exp(g)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AquiferConfig {
    #[serde(rename = "L")]
    pub length: f64,
    #[serde(rename = "H1")]
    pub h1: f64,
    #[serde(rename = "H2")]
    pub h2: f64,
    #[serde(rename = "Q")]
    pub source: f64,
    #[serde(rename = "nObs")]
    pub n_obs: usize,
    #[serde(rename = "gridNodes")]
    pub grid_nodes: usize,
    pub kernel: Kernel,
    #[serde(rename = "gpMean")]
    pub gp_mean: f64,
}

impl Default for AquiferConfig {
    fn default() -> Self {
        Self {
            length: 100.0,
            h1: 50.0,
            h2: 20.0,
            source: 0.02,
            n_obs: 20,
            grid_nodes: 201,
            kernel: Kernel::default(),
            gp_mean: 1.0,
        }
    }
}

impl AquiferConfig {
    pub fn with_kernel(&self, kernel: Kernel) -> Self {
        Self { kernel, ..*self }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(AquiferError::Config(msg));
        if !(self.length > 0.0 && self.length.is_finite()) {
            return bad(format!("L must be positive, got {}", self.length));
        }
        if !(self.h1.is_finite() && self.h2.is_finite() && self.source.is_finite()) {
            return bad("H1, H2 and Q must be finite".into());
        }
        if self.n_obs < 2 {
            return bad(format!("nObs must be at least 2, got {}", self.n_obs));
        }
        if self.grid_nodes < self.n_obs.max(3) {
            return bad(format!(
                "gridNodes ({}) must be at least nObs ({}) and 3",
                self.grid_nodes, self.n_obs
            ));
        }
        if !self.gp_mean.is_finite() {
            return bad("gpMean must be finite".into());
        }
        self.kernel.validate()
    }

    pub fn dx(&self) -> f64 {
        self.length / (self.grid_nodes - 1) as f64
    }

    /// FD nodes `x_i = iΔx`.
    pub fn nodes(&self) -> Vec<f64> {
        let dx = self.dx();
        (0..self.grid_nodes).map(|i| i as f64 * dx).collect()
    }

    /// Interior observation points `x_i = iL/(n+1)`, `i = 1..n`.
    pub fn observation_points(&self) -> Vec<f64> {
        let h = self.length / (self.n_obs + 1) as f64;
        (1..=self.n_obs).map(|i| i as f64 * h).collect()
    }
}

/// Observation noise of standard deviation `α · 0.05 · √(Tr(A)/n)`.
#[derive(Clone, Debug)]
pub struct NoiseSpec {
    pub alpha: f64,
    pub reference: SpdMatrix64,
}

impl NoiseSpec {
    pub fn new(alpha: f64, reference: SpdMatrix64) -> Result<Self> {
        if !(alpha >= 0.0 && alpha.is_finite()) {
            return Err(AquiferError::Config(format!(
                "noise alpha must be nonnegative, got {alpha}"
            )));
        }
        Ok(Self { alpha, reference })
    }

    pub fn std(&self) -> f64 {
        self.alpha * 0.05 * (self.reference.trace() / self.reference.dim() as f64).sqrt()
    }
}
