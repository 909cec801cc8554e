//! Coordinate descent over the parameters of a [`FamilyTree`].
//!
//! Coordinates are visited in parameter order, starting from the zero vector.
//! When moving a coordinate alone traces a geodesic (always true for the
//! root parameter, and for deeper ones while every ancestor sits at the
//! matching endpoint) the step is the exact one-dimensional projection onto
//! that geodesic. Otherwise the curve `t_j ↦ φ(…, t_j, …)` is not a geodesic
//! and the step is a bracketed Brent search on the objective itself.
//! Coordinates that currently have no effect on the family are left alone,
//! and a step is kept only if it does not increase the objective.

use argmin::core::{CostFunction, Executor, State};
use argmin::solver::brent::BrentOpt;
use nalgebra::DVector;
use serde::ser::SerializeStruct;
use serde::{Serialize, Serializer};

use crate::error::{GeoError, Result};
use crate::family::{CoordinateRole, FamilyTree};
use crate::manifold::{generalized_eigenvalues, SpdMatrix};
use crate::projection::{kl_gaussian, project, Method};
use crate::scalar::Real;

/// Settings for [`coordinate_descent`].
#[derive(Clone, Copy, Debug, PartialEq, serde::Deserialize, Serialize)]
#[serde(rename_all = "camelCase", default)]
pub struct DescentConfig {
    /// a sweep in which no coordinate moves more than this ends the descent
    pub coord_tol: f64,
    pub max_outer_iters: usize,
    pub objective: Method,
}

impl Default for DescentConfig {
    fn default() -> Self {
        Self {
            coord_tol: 1e-4,
            max_outer_iters: 50,
            objective: Method::Natural,
        }
    }
}

impl DescentConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.coord_tol > 0.0) {
            return Err(GeoError::InvalidArgument(format!(
                "coordTol must be positive, got {}",
                self.coord_tol
            )));
        }
        if self.max_outer_iters == 0 {
            return Err(GeoError::InvalidArgument(
                "maxOuterIters must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct DescentResult<T: Real> {
    pub params: Vec<T>,
    pub projected: SpdMatrix<T>,
    /// objective at the start point followed by one entry per sweep
    pub objective_trace: Vec<T>,
    pub converged: bool,
    pub outer_iters: usize,
    /// coordinates skipped at least once because their segment was degenerate
    pub skipped: Vec<usize>,
}

impl<T: Real> DescentResult<T> {
    pub fn objective(&self) -> T {
        *self
            .objective_trace
            .last()
            .expect("trace holds the start point")
    }
}

impl<T: Real> Serialize for DescentResult<T> {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let f = |v: &[T]| v.iter().map(|x| x.as_f64()).collect::<Vec<_>>();
        let mut s = serializer.serialize_struct("DescentResult", 6)?;
        s.serialize_field("params", &f(&self.params))?;
        s.serialize_field("objective", &self.objective().as_f64())?;
        s.serialize_field("objectiveTrace", &f(&self.objective_trace))?;
        s.serialize_field("converged", &self.converged)?;
        s.serialize_field("outerIters", &self.outer_iters)?;
        s.serialize_field("skipped", &self.skipped)?;
        s.end()
    }
}

/// Order in which coordinates are updated within a sweep.
///
/// Parameters are numbered by node height, so this is simply `0..p`: the
/// spine from the deepest node upwards for unbalanced trees, parents of
/// leaves first and the root last for balanced ones.
pub fn sweep_order<T: Real>(tree: &FamilyTree<T>) -> Vec<usize> {
    (0..tree.num_params()).collect()
}

/// Objective reported in traces: the natural distance, or the divergence
/// in the direction selected by `method`.
pub fn family_objective<T: Real>(
    method: Method,
    point: &SpdMatrix<T>,
    c: &SpdMatrix<T>,
) -> Result<T> {
    match method {
        Method::Natural => Ok(squared_distance(point, c)?.sqrt()),
        Method::ReverseI => kl_gaussian(c, point),
        Method::IProj => kl_gaussian(point, c),
    }
}

fn squared_distance<T: Real>(a: &SpdMatrix<T>, b: &SpdMatrix<T>) -> Result<T> {
    let lambda: DVector<T> = generalized_eigenvalues(a, b)?;
    Ok(lambda.iter().fold(T::zero(), |acc, v| acc + v.ln().powi(2)))
}

/// Smooth loss minimized by the Brent steps (squared distance for the
/// natural objective so the minimum is not a kink).
fn smooth_loss<T: Real>(method: Method, point: &SpdMatrix<T>, c: &SpdMatrix<T>) -> Result<T> {
    match method {
        Method::Natural => squared_distance(point, c),
        _ => family_objective(method, point, c),
    }
}

struct CoordinateCost<'a, T: Real> {
    tree: &'a FamilyTree<T>,
    c: &'a SpdMatrix<T>,
    params: Vec<T>,
    j: usize,
    method: Method,
}

impl<T: Real> CoordinateCost<'_, T> {
    fn eval(&self, s: f64) -> f64 {
        let mut p = self.params.clone();
        p[self.j] = T::lit(s);
        self.tree
            .eval(&p)
            .and_then(|pt| smooth_loss(self.method, &pt, self.c))
            .map(|v| v.as_f64())
            .ok()
            .filter(|v| v.is_finite())
            .unwrap_or(f64::INFINITY)
    }
}

impl<T: Real> CostFunction for CoordinateCost<'_, T> {
    type Param = f64;
    type Output = f64;

    fn cost(&self, s: &f64) -> std::result::Result<f64, argmin::core::Error> {
        Ok(self.eval(*s))
    }
}

/// Widens an interval around `t0` downhill until the loss rises again.
fn bracket(f: impl Fn(f64) -> f64, t0: f64) -> (f64, f64) {
    const LIMIT: f64 = 100.0;
    let f0 = f(t0);
    let mut step = 0.5;
    let (fl, fr) = (f(t0 - step), f(t0 + step));
    if fl >= f0 && fr >= f0 {
        return (t0 - step, t0 + step);
    }
    let dir = if fr < fl { 1.0 } else { -1.0 };
    let mut prev = t0;
    let mut best = t0 + dir * step;
    let mut f_best = if dir > 0.0 { fr } else { fl };
    loop {
        step *= 2.0;
        let next = best + dir * step;
        let f_next = f(next);
        if f_next >= f_best || next.abs() > LIMIT {
            return if dir > 0.0 {
                (prev, next)
            } else {
                (next, prev)
            };
        }
        prev = best;
        best = next;
        f_best = f_next;
    }
}

fn brent_step<T: Real>(cost: CoordinateCost<'_, T>, t0: f64) -> Result<f64> {
    let (lo, hi) = bracket(|s| cost.eval(s), t0);
    let solver = BrentOpt::new(lo, hi).set_tolerance(f64::EPSILON.sqrt(), 1e-10);
    let res = Executor::new(cost, solver)
        .configure(|s| s.max_iters(200))
        .run()
        .map_err(|e| GeoError::NonConvergence {
            iterations: 0,
            reason: format!("coordinate line search failed: {e}"),
        })?;
    res.state()
        .get_best_param()
        .copied()
        .ok_or_else(|| GeoError::NonConvergence {
            iterations: 0,
            reason: "coordinate line search returned no point".into(),
        })
}

/// Minimizes the configured objective from `c` to the tree family by cyclic
/// coordinate updates starting at the zero vector.
pub fn coordinate_descent<T: Real>(
    tree: &FamilyTree<T>,
    c: &SpdMatrix<T>,
    cfg: &DescentConfig,
) -> Result<DescentResult<T>> {
    cfg.validate()?;
    let method = cfg.objective;
    let order = sweep_order(tree);
    let mut params = vec![T::zero(); tree.num_params()];
    let mut current = smooth_loss(method, &tree.eval(&params)?, c)?;
    let mut trace = vec![family_objective(method, &tree.eval(&params)?, c)?];
    let mut skipped = Vec::new();
    let mut converged = false;
    let mut outer_iters = 0;

    while outer_iters < cfg.max_outer_iters {
        outer_iters += 1;
        let mut max_move = 0.0f64;
        for &j in &order {
            let seg = tree.node_segment(&params, j)?;
            if seg.length() <= T::lit(T::PD_TOL) {
                if !skipped.contains(&j) {
                    skipped.push(j);
                }
                continue;
            }
            let candidate = match tree.coordinate_role(&params, j) {
                CoordinateRole::Inactive => continue,
                CoordinateRole::Geodesic => project(method, &seg, c)?.t,
                CoordinateRole::General => {
                    let cost = CoordinateCost {
                        tree,
                        c,
                        params: params.clone(),
                        j,
                        method,
                    };
                    T::lit(brent_step(cost, params[j].as_f64())?)
                }
            };
            if !candidate.is_finite() {
                continue;
            }
            let mut trial = params.clone();
            trial[j] = candidate;
            let loss = smooth_loss(method, &tree.eval(&trial)?, c)?;
            if loss <= current {
                max_move = max_move.max((candidate - params[j]).abs().as_f64());
                params = trial;
                current = loss;
            }
        }
        trace.push(family_objective(method, &tree.eval(&params)?, c)?);
        if max_move <= cfg.coord_tol {
            converged = true;
            break;
        }
    }

    Ok(DescentResult {
        projected: tree.eval(&params)?,
        params,
        objective_trace: trace,
        converged,
        outer_iters,
        skipped,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::family::{build_tree, GeodesicSegment, TreeShape};
    use crate::projection::natural_projection;
    use nalgebra::DMatrix;

    fn spd(n: usize, seed: u64) -> SpdMatrix<f64> {
        let mut s = seed.wrapping_mul(0xD1B54A32D192ED03) | 1;
        let b = DMatrix::from_fn(n, n, |_, _| {
            s ^= s << 13;
            s ^= s >> 7;
            s ^= s << 17;
            (s >> 11) as f64 / (1u64 << 53) as f64 - 0.5
        });
        SpdMatrix::new(&b * b.transpose() + DMatrix::identity(n, n) * 0.3).unwrap()
    }

    #[test]
    fn sweep_orders() {
        let a: Vec<_> = (0..4).map(|i| spd(2, i)).collect();
        assert_eq!(
            sweep_order(&build_tree(a[..3].to_vec(), TreeShape::Unbalanced).unwrap()),
            vec![0, 1]
        );
        let bal = build_tree(a.clone(), TreeShape::Balanced).unwrap();
        assert_eq!(sweep_order(&bal), vec![0, 1, 2]);
        assert_eq!(bal.root_param(), 2);
        assert_eq!(
            sweep_order(&build_tree(a[..2].to_vec(), TreeShape::Unbalanced).unwrap()),
            vec![0]
        );
    }

    #[test]
    fn single_parameter_matches_projection() {
        let (a1, a2, c) = (spd(4, 1), spd(4, 2), spd(4, 3));
        let tree = build_tree(vec![a1.clone(), a2.clone()], TreeShape::Unbalanced).unwrap();
        let r = coordinate_descent(&tree, &c, &DescentConfig::default()).unwrap();
        let p = natural_projection(&GeodesicSegment::new(a1, a2).unwrap(), &c).unwrap();
        assert!((r.params[0] - p.t).abs() < 1e-10);
        assert!((r.objective() - p.objective).abs() < 1e-10);
        assert!(r.converged);
    }

    #[test]
    fn recovers_point_on_family() {
        let a: Vec<_> = (0..3).map(|i| spd(4, 10 + i)).collect();
        let tree = build_tree(a, TreeShape::Unbalanced).unwrap();
        let c = tree.eval(&[0.4, 0.7]).unwrap();
        let cfg = DescentConfig {
            coord_tol: 1e-9,
            max_outer_iters: 500,
            ..Default::default()
        };
        let r = coordinate_descent(&tree, &c, &cfg).unwrap();
        assert!(r.objective() < 1e-6, "{:?}", r.objective_trace);
        for w in r.objective_trace.windows(2) {
            assert!(w[1] <= w[0] + 1e-12);
        }
    }

    #[test]
    fn trace_non_increasing_for_all_objectives() {
        let a: Vec<_> = (0..4).map(|i| spd(3, 20 + i)).collect();
        let c = spd(3, 30);
        for shape in [TreeShape::Unbalanced, TreeShape::Balanced] {
            let tree = build_tree(a.clone(), shape).unwrap();
            for m in Method::ALL {
                let cfg = DescentConfig {
                    objective: m,
                    ..Default::default()
                };
                let r = coordinate_descent(&tree, &c, &cfg).unwrap();
                assert_eq!(r.objective_trace.len(), r.outer_iters + 1);
                for w in r.objective_trace.windows(2) {
                    assert!(w[1] <= w[0] + 1e-12, "{m}: {:?}", r.objective_trace);
                }
            }
        }
    }

    #[test]
    fn degenerate_coordinate_skipped() {
        let a = spd(3, 40);
        let tree = build_tree(
            vec![a.clone(), a.clone(), spd(3, 41)],
            TreeShape::Unbalanced,
        )
        .unwrap();
        let r = coordinate_descent(&tree, &spd(3, 42), &DescentConfig::default()).unwrap();
        assert_eq!(r.skipped, vec![0]);
        assert!(r.converged);
    }

    #[test]
    fn invalid_config() {
        let tree = build_tree(vec![spd(2, 1), spd(2, 2)], TreeShape::Unbalanced).unwrap();
        let bad = DescentConfig {
            coord_tol: 0.0,
            ..Default::default()
        };
        assert!(coordinate_descent(&tree, &spd(2, 3), &bad).is_err());
        let bad = DescentConfig {
            max_outer_iters: 0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn result_json_has_trace() {
        let tree =
            build_tree(vec![spd(2, 1), spd(2, 2), spd(2, 5)], TreeShape::Unbalanced).unwrap();
        let r = coordinate_descent(&tree, &spd(2, 3), &DescentConfig::default()).unwrap();
        let v = serde_json::to_value(&r).unwrap();
        assert_eq!(
            v["objectiveTrace"].as_array().unwrap().len(),
            r.objective_trace.len()
        );
        assert_eq!(v["params"].as_array().unwrap().len(), 2);
    }
}
