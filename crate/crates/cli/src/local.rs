//! Local comparison of the three projections near an anchor, on random
//! Wishart anchors.

use std::path::{Path, PathBuf};

use geocov::{local_analysis, orthogonal_offset, LocalAnalysisResult, SpdMatrix64, SymMatrix64};
use geocov_aquifer::report::write_json;
use nalgebra::{DMatrix, Matrix3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use geocov_aquifer::AquiferError;

use crate::error::{CliError, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", default)]
pub struct LocalAnalysisConfig {
    pub n: usize,
    /// degrees of freedom of the Wishart anchors
    pub dof: usize,
    pub epsilons: Vec<f64>,
    /// length of the offset direction in the metric at the first anchor
    pub offset_norm: f64,
}

impl Default for LocalAnalysisConfig {
    fn default() -> Self {
        Self {
            n: 10,
            dof: 20,
            epsilons: (1..=10).map(|i| 0.01 * i as f64).collect(),
            offset_norm: 1.0,
        }
    }
}

impl LocalAnalysisConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(CliError::Config(format!(
                "n must be at least 2, got {}",
                self.n
            )));
        }
        if self.dof < self.n {
            return Err(CliError::Config(format!(
                "dof must be at least n = {}, got {}",
                self.n, self.dof
            )));
        }
        if !(self.offset_norm > 0.0 && self.offset_norm.is_finite()) {
            return Err(CliError::Config(format!(
                "offsetNorm must be positive, got {}",
                self.offset_norm
            )));
        }
        if self.epsilons.is_empty() || self.epsilons.iter().any(|e| !e.is_finite()) {
            return Err(CliError::Config(
                "epsilons must be finite and non-empty".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct LocalSummary {
    /// analytic second derivative of the reverse-I offset at zero
    pub hat_second_deriv: f64,
    /// `ε²` coefficients of least-squares quadratics through the offsets
    pub hat_quadratic: f64,
    pub check_quadratic: f64,
}

#[derive(Clone, Debug)]
pub struct LocalOutput {
    pub anchors: [SpdMatrix64; 2],
    pub target: SpdMatrix64,
    pub curves: LocalAnalysisResult,
    pub summary: LocalSummary,
}

fn wishart(rng: &mut ChaCha8Rng, n: usize, dof: usize) -> Result<SpdMatrix64> {
    let g = DMatrix::from_fn(n, dof, |_, _| rng.sample::<f64, _>(StandardNormal));
    Ok(SpdMatrix64::new(&g * g.transpose() / dof as f64)?)
}

/// `ε²` coefficient of the least-squares fit `a + bε + cε²`.
pub fn quadratic_coefficient(x: &[f64], y: &[f64]) -> f64 {
    let mut m = Matrix3::zeros();
    let mut r = Vector3::zeros();
    for (&e, &v) in x.iter().zip(y) {
        let row = Vector3::new(1.0, e, e * e);
        m += row * row.transpose();
        r += row * v;
    }
    m.lu().solve(&r).map_or(f64::NAN, |c| c[2])
}

pub fn run(cfg: &LocalAnalysisConfig, seed: u64) -> Result<LocalOutput> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let a1 = wishart(&mut rng, cfg.n, cfg.dof)?;
    let a2 = wishart(&mut rng, cfg.n, cfg.dof)?;
    let g = DMatrix::from_fn(cfg.n, cfg.n, |_, _| rng.sample::<f64, _>(StandardNormal));
    let x = (&g + g.transpose()) * 0.5;
    // ‖A₁^{-1/2} X A₁^{-1/2}‖_F, computed through the Cholesky factor
    let l = a1.as_matrix().clone().cholesky().expect("SPD anchor").l();
    let lx = l.solve_lower_triangular(&x).expect("nonsingular factor");
    let white = l
        .solve_lower_triangular(&lx.transpose())
        .expect("nonsingular factor");
    let x = SymMatrix64::new(x * (cfg.offset_norm / white.norm()))?;
    let target = orthogonal_offset(&a1, &a2, &x)?;
    let curves = local_analysis(&a1, &a2, &target, &cfg.epsilons)?;
    let summary = LocalSummary {
        hat_second_deriv: curves.hat_second_deriv,
        hat_quadratic: quadratic_coefficient(&curves.epsilons, &curves.delta_hat),
        check_quadratic: quadratic_coefficient(&curves.epsilons, &curves.delta_check),
    };
    Ok(LocalOutput {
        anchors: [a1, a2],
        target,
        curves,
        summary,
    })
}

/// Writes `curves.csv`, `summary.json`, both anchors and the target.
pub fn write(dir: &Path, out: &LocalOutput) -> Result<Vec<PathBuf>> {
    let curves = dir.join("curves.csv");
    let mut w = csv::Writer::from_path(&curves).map_err(AquiferError::from)?;
    let c = &out.curves;
    let rows = (|| -> csv::Result<()> {
        w.write_record(["epsilon", "delta_natural", "delta_hat", "delta_check"])?;
        for i in 0..c.epsilons.len() {
            w.write_record([
                format!("{:e}", c.epsilons[i]),
                format!("{:e}", c.t_star[i]),
                format!("{:e}", c.delta_hat[i]),
                format!("{:e}", c.delta_check[i]),
            ])?;
        }
        w.flush()?;
        Ok(())
    })();
    rows.map_err(AquiferError::from)?;
    let summary = dir.join("summary.json");
    write_json(&summary, &out.summary)?;
    let mut paths = vec![curves, summary];
    for (name, m) in [
        ("anchor1.json", &out.anchors[0]),
        ("anchor2.json", &out.anchors[1]),
        ("target.json", &out.target),
    ] {
        let p = dir.join(name);
        geocov::io::write_matrix(&p, m.as_matrix())?;
        paths.push(p);
    }
    Ok(paths)
}
