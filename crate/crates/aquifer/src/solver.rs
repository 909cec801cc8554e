use nalgebra::DVector;

use crate::config::AquiferConfig;
use crate::error::{AquiferError, Result};

/// Solves `(κ h′)′ + Q = 0` with Dirichlet data by the conservative
/// three-point scheme
/// `κ_{i+½}(h_{i+1} − h_i) − κ_{i−½}(h_i − h_{i−1}) = −QΔx²`.
///
/// `kappa_mid[i]` is the permeability at `(x_i + x_{i+1})/2`, so it has
/// `gridNodes − 1` entries.
pub fn solve_head(kappa_mid: &[f64], cfg: &AquiferConfig) -> Result<DVector<f64>> {
    let n = cfg.grid_nodes;
    if kappa_mid.len() != n - 1 {
        return Err(AquiferError::Config(format!(
            "expected {} midpoint permeabilities, got {}",
            n - 1,
            kappa_mid.len()
        )));
    }
    if let Some(k) = kappa_mid.iter().find(|k| !(**k > 0.0 && k.is_finite())) {
        return Err(AquiferError::Config(format!(
            "permeability must be positive and finite, got {k}"
        )));
    }
    let mut h = DVector::zeros(n);
    solve_into(kappa_mid, cfg, &mut Vec::new(), h.as_mut_slice());
    Ok(h)
}

/// Thomas algorithm on the interior unknowns; `work` is scratch space.
pub(crate) fn solve_into(
    kappa_mid: &[f64],
    cfg: &AquiferConfig,
    work: &mut Vec<f64>,
    h: &mut [f64],
) {
    let n = cfg.grid_nodes;
    let m = n - 2;
    let dx = cfg.dx();
    let rhs0 = cfg.source * dx * dx;
    h[0] = cfg.h1;
    h[n - 1] = cfg.h2;
    work.clear();
    work.resize(m, 0.0);
    // forward sweep: row i has sub −κ_{i−½}, diag κ_{i−½}+κ_{i+½}, super −κ_{i+½}
    let mut prev_c = 0.0;
    for r in 0..m {
        let i = r + 1;
        let (kl, kr) = (kappa_mid[i - 1], kappa_mid[i]);
        let mut d = rhs0;
        if i == 1 {
            d += kl * cfg.h1;
        }
        if i == n - 2 {
            d += kr * cfg.h2;
        }
        let a = if r == 0 { 0.0 } else { -kl };
        let denom = kl + kr - a * prev_c;
        assert!(denom > 0.0, "singular tridiagonal system");
        let c = if r + 1 < m { -kr / denom } else { 0.0 };
        let prev_d = if r == 0 { 0.0 } else { h[i - 1] };
        h[i] = (d - a * prev_d) / denom;
        work[r] = c;
        prev_c = c;
    }
    for r in (0..m.saturating_sub(1)).rev() {
        let i = r + 1;
        h[i] -= work[r] * h[i + 1];
    }
}

/// Linear interpolation of nodal heads at the observation points.
pub fn observe(h: &[f64], cfg: &AquiferConfig) -> DVector<f64> {
    let pts = cfg.observation_points();
    let mut out = DVector::zeros(pts.len());
    observe_into(h, cfg, &pts, out.as_mut_slice());
    out
}

pub(crate) fn observe_into(h: &[f64], cfg: &AquiferConfig, pts: &[f64], out: &mut [f64]) {
    let dx = cfg.dx();
    let last = cfg.grid_nodes - 1;
    for (o, &x) in out.iter_mut().zip(pts) {
        let s = x / dx;
        let i = (s.floor() as usize).min(last - 1);
        let w = s - i as f64;
        *o = (1.0 - w) * h[i] + w * h[i + 1];
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn laplace_is_linear() {
        let cfg = AquiferConfig {
            source: 0.0,
            ..AquiferConfig::default()
        };
        let h = solve_head(&vec![1.0; cfg.grid_nodes - 1], &cfg).unwrap();
        for (i, x) in cfg.nodes().into_iter().enumerate() {
            assert!((h[i] - (50.0 - 0.3 * x)).abs() < 1e-10);
        }
    }

    #[test]
    fn constant_coefficient_parabola() {
        // three-point differences are exact for quadratics
        let cfg = AquiferConfig::default();
        let h = solve_head(&vec![1.0; cfg.grid_nodes - 1], &cfg).unwrap();
        for (i, x) in cfg.nodes().into_iter().enumerate() {
            let exact = -0.01 * x * x + (0.01 * 100.0 - 0.3) * x + 50.0;
            assert!((h[i] - exact).abs() < 1e-9, "x={x}: {} vs {exact}", h[i]);
        }
    }

    #[test]
    fn scaling_kappa_scales_source_term() {
        let cfg = AquiferConfig {
            h1: 0.0,
            h2: 0.0,
            ..AquiferConfig::default()
        };
        let h1 = solve_head(&vec![1.0; cfg.grid_nodes - 1], &cfg).unwrap();
        let h2 = solve_head(&vec![2.0; cfg.grid_nodes - 1], &cfg).unwrap();
        assert!((h1 - 2.0 * h2).amax() < 1e-10);
    }

    #[test]
    fn rejects_bad_kappa() {
        let cfg = AquiferConfig::default();
        assert!(solve_head(&vec![1.0; 10], &cfg).is_err());
        let mut k = vec![1.0; cfg.grid_nodes - 1];
        k[3] = 0.0;
        assert!(solve_head(&k, &cfg).is_err());
    }

    #[test]
    fn observation_interpolates_linear_fields() {
        let cfg = AquiferConfig::default();
        let h: Vec<f64> = cfg.nodes().iter().map(|x| 3.0 * x - 1.0).collect();
        let obs = observe(&h, &cfg);
        for (o, x) in obs.iter().zip(cfg.observation_points()) {
            assert!((o - (3.0 * x - 1.0)).abs() < 1e-10);
        }
    }
}
