//! Regularization studies on the aquifer: project noisy Monte-Carlo
//! covariances onto families built from high-sample anchors and compare the
//! distance to the high-sample truth before (`b′`) and after (`b`).

use geocov::{
    build_tree, coordinate_descent, distance_to_geodesic_point, natural_distance,
    natural_projection, project, DescentConfig, FamilyTree64, GeoError, GeodesicSegment64, Method,
    SpdMatrix64, TreeShape,
};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{AquiferConfig, Kernel, NoiseSpec};
use crate::error::{AquiferError, Result};
use crate::sampling::{HeadModel, StreamKey};

/// Stream domain of anchor `i`.
pub fn anchor_domain(i: usize) -> u64 {
    1 + i as u64
}
pub const TRUTH_DOMAIN: u64 = 1000;
/// Stream domain of trial `t`.
pub fn trial_domain(t: usize) -> u64 {
    (1 << 32) + t as u64
}

fn default_anchor_q() -> usize {
    100_000
}

fn default_target_q() -> usize {
    1000
}

fn check_counts(anchor_q: usize, target_q: usize, trials: usize) -> Result<()> {
    if anchor_q < 2 || target_q < 2 {
        return Err(AquiferError::Config(
            "sample counts must be at least 2".into(),
        ));
    }
    if trials == 0 {
        return Err(AquiferError::Config("trials must be at least 1".into()));
    }
    Ok(())
}

fn check_kernels(anchors: &[Kernel], target: &Kernel, expected: usize) -> Result<()> {
    if anchors.len() != expected {
        return Err(AquiferError::Config(format!(
            "expected {expected} anchor kernels, got {}",
            anchors.len()
        )));
    }
    anchors
        .iter()
        .chain([target])
        .try_for_each(Kernel::validate)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", default)]
pub struct RegularizationConfig {
    pub aquifer: AquiferConfig,
    pub anchors: Vec<Kernel>,
    pub target: Kernel,
    pub anchor_q: usize,
    pub target_q: usize,
    pub trials: usize,
}

impl Default for RegularizationConfig {
    fn default() -> Self {
        Self {
            aquifer: AquiferConfig::default(),
            anchors: vec![Kernel::new(0.3, 20.0), Kernel::new(0.3, 30.0)],
            target: Kernel::new(0.3, 25.0),
            anchor_q: default_anchor_q(),
            target_q: default_target_q(),
            trials: 200,
        }
    }
}

impl RegularizationConfig {
    pub fn validate(&self) -> Result<()> {
        self.aquifer.validate()?;
        check_kernels(&self.anchors, &self.target, 2)?;
        check_counts(self.anchor_q, self.target_q, self.trials)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", default)]
pub struct NoiseConfig {
    pub aquifer: AquiferConfig,
    pub anchors: Vec<Kernel>,
    pub target: Kernel,
    pub anchor_q: usize,
    pub target_q: usize,
    pub trials: usize,
    pub alphas: Vec<f64>,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        let r = RegularizationConfig::default();
        Self {
            aquifer: r.aquifer,
            anchors: r.anchors,
            target: r.target,
            anchor_q: r.anchor_q,
            target_q: r.target_q,
            trials: 100,
            alphas: (1..=10).map(|k| k as f64 / 10.0).collect(),
        }
    }
}

impl NoiseConfig {
    pub fn validate(&self) -> Result<()> {
        self.aquifer.validate()?;
        check_kernels(&self.anchors, &self.target, 2)?;
        check_counts(self.anchor_q, self.target_q, self.trials)?;
        if self.alphas.is_empty() {
            return Err(AquiferError::Config("alpha grid is empty".into()));
        }
        if let Some(a) = self.alphas.iter().find(|a| !(**a >= 0.0 && a.is_finite())) {
            return Err(AquiferError::Config(format!(
                "noise alpha must be nonnegative, got {a}"
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", default)]
pub struct ContourSpec {
    pub t1: [f64; 2],
    pub t2: [f64; 2],
    pub steps: usize,
}

impl Default for ContourSpec {
    fn default() -> Self {
        Self {
            t1: [-1.5, 2.5],
            t2: [-1.5, 2.5],
            steps: 41,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", default)]
pub struct MultiparamConfig {
    pub aquifer: AquiferConfig,
    pub anchors: Vec<Kernel>,
    pub target: Kernel,
    pub anchor_q: usize,
    pub target_q: usize,
    pub trials: usize,
    pub descent: DescentConfig,
    /// sweep budget used for the convergence statistic
    pub sweep_budget: usize,
    pub contour: ContourSpec,
}

impl Default for MultiparamConfig {
    fn default() -> Self {
        Self {
            aquifer: AquiferConfig::default(),
            anchors: vec![
                Kernel::new(0.3, 20.0),
                Kernel::new(0.3, 30.0),
                Kernel::new(0.4, 25.0),
            ],
            target: Kernel::new(0.35, 25.0),
            anchor_q: default_anchor_q(),
            target_q: default_target_q(),
            trials: 200,
            descent: DescentConfig::default(),
            sweep_budget: 10,
            contour: ContourSpec::default(),
        }
    }
}

impl MultiparamConfig {
    pub fn validate(&self) -> Result<()> {
        self.aquifer.validate()?;
        check_kernels(&self.anchors, &self.target, 3)?;
        check_counts(self.anchor_q, self.target_q, self.trials)?;
        self.descent.validate()?;
        if self.contour.steps < 2 {
            return Err(AquiferError::Config(
                "contour grid needs at least 2 steps".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", default)]
pub struct FlatConfig {
    pub aquifer: AquiferConfig,
    pub anchors: Vec<Kernel>,
    pub target: Kernel,
    pub anchor_q: usize,
    pub t_min: f64,
    pub t_max: f64,
    pub steps: usize,
}

impl Default for FlatConfig {
    fn default() -> Self {
        Self {
            aquifer: AquiferConfig::default(),
            anchors: vec![Kernel::new(0.3, 20.0), Kernel::new(0.3, 100.0)],
            target: Kernel::new(0.3, 60.0),
            anchor_q: default_anchor_q(),
            t_min: -2.0,
            t_max: 3.0,
            steps: 501,
        }
    }
}

impl FlatConfig {
    pub fn validate(&self) -> Result<()> {
        self.aquifer.validate()?;
        check_kernels(&self.anchors, &self.target, 2)?;
        check_counts(self.anchor_q, 2, 1)?;
        if !(self.t_min < self.t_max) || self.steps < 3 {
            return Err(AquiferError::Config(
                "t grid needs tMin < tMax and at least 3 steps".into(),
            ));
        }
        Ok(())
    }
}

/// High-sample anchors and truth shared by all trials of a study.
#[derive(Clone, Debug)]
pub struct Study {
    pub anchors: Vec<SpdMatrix64>,
    pub truth: SpdMatrix64,
    pub target_model: HeadModel,
}

/// Builds the anchor covariances and the reference truth at `q` samples.
pub fn build_study(
    aquifer: &AquiferConfig,
    anchors: &[Kernel],
    target: &Kernel,
    q: usize,
    seed: u64,
) -> Result<Study> {
    let anchors = anchors
        .iter()
        .enumerate()
        .map(|(i, k)| build_anchor(aquifer, k, q, StreamKey::new(seed, anchor_domain(i))))
        .collect::<Result<Vec<_>>>()?;
    let target_model = HeadModel::new(&aquifer.with_kernel(*target))?;
    let truth = target_model
        .covariance(q, StreamKey::new(seed, TRUTH_DOMAIN), None)?
        .matrix()
        .clone();
    Ok(Study {
        anchors,
        truth,
        target_model,
    })
}

pub fn build_anchor(
    aquifer: &AquiferConfig,
    kernel: &Kernel,
    q: usize,
    key: StreamKey,
) -> Result<SpdMatrix64> {
    Ok(HeadModel::new(&aquifer.with_kernel(*kernel))?
        .covariance(q, key, None)?
        .matrix()
        .clone())
}

/// `b′/b`, or `None` when either distance vanishes.
pub fn regularization_ratio(b_prime: f64, b: f64) -> Option<f64> {
    (b_prime > 0.0 && b > 0.0).then(|| b_prime / b)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct TrialRow {
    pub trial: usize,
    pub seed: u64,
    pub b_prime: f64,
    pub b: f64,
    pub ratio: Option<f64>,
    pub t: Vec<f64>,
}

/// One natural-projection trial against a known truth.
pub fn regularization_trial(
    seg: &GeodesicSegment64,
    truth: &SpdMatrix64,
    estimate: &SpdMatrix64,
) -> Result<(f64, f64, f64)> {
    let b_prime = natural_distance(estimate, truth)?;
    let proj = natural_projection(seg, estimate)?;
    let b = natural_distance(&proj.projected, truth)?;
    Ok((b_prime, b, proj.t))
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct Quartiles {
    pub count: usize,
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
    pub mean: f64,
}

impl Quartiles {
    /// Linear-interpolation quantiles; NaN fields when `values` is empty.
    pub fn of(values: &[f64]) -> Self {
        if values.is_empty() {
            return Self {
                count: 0,
                min: f64::NAN,
                q1: f64::NAN,
                median: f64::NAN,
                q3: f64::NAN,
                max: f64::NAN,
                mean: f64::NAN,
            };
        }
        let mut v = values.to_vec();
        v.sort_by(f64::total_cmp);
        let q = |p: f64| {
            let pos = p * (v.len() - 1) as f64;
            let i = pos.floor() as usize;
            let j = (i + 1).min(v.len() - 1);
            v[i] + (pos - i as f64) * (v[j] - v[i])
        };
        Self {
            count: v.len(),
            min: v[0],
            q1: q(0.25),
            median: q(0.5),
            q3: q(0.75),
            max: v[v.len() - 1],
            mean: v.iter().sum::<f64>() / v.len() as f64,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct RatioSummary {
    pub trials: usize,
    /// trials whose ratio was defined
    pub ratio_count: usize,
    pub mean_b_prime: f64,
    pub mean_b: f64,
    pub mean_ratio: f64,
    pub ratio: Quartiles,
}

impl RatioSummary {
    pub fn from_rows<'a>(rows: impl IntoIterator<Item = (f64, f64, Option<f64>)> + 'a) -> Self {
        let rows: Vec<_> = rows.into_iter().collect();
        let n = rows.len() as f64;
        let ratios: Vec<f64> = rows.iter().filter_map(|r| r.2).collect();
        let q = Quartiles::of(&ratios);
        Self {
            trials: rows.len(),
            ratio_count: ratios.len(),
            mean_b_prime: rows.iter().map(|r| r.0).sum::<f64>() / n,
            mean_b: rows.iter().map(|r| r.1).sum::<f64>() / n,
            mean_ratio: q.mean,
            ratio: q,
        }
    }
}

#[derive(Clone, Debug)]
pub struct RegularizationResult {
    pub anchors: Vec<SpdMatrix64>,
    pub truth: SpdMatrix64,
    pub rows: Vec<TrialRow>,
    pub summary: RatioSummary,
}

pub fn experiment_regularization(
    cfg: &RegularizationConfig,
    seed: u64,
) -> Result<RegularizationResult> {
    cfg.validate()?;
    let study = build_study(&cfg.aquifer, &cfg.anchors, &cfg.target, cfg.anchor_q, seed)?;
    let seg = GeodesicSegment64::new(study.anchors[0].clone(), study.anchors[1].clone())?;
    let rows = (0..cfg.trials)
        .into_par_iter()
        .map(|trial| {
            let key = StreamKey::new(seed, trial_domain(trial));
            let est = study.target_model.covariance(cfg.target_q, key, None)?;
            let (b_prime, b, t) = regularization_trial(&seg, &study.truth, est.matrix())?;
            Ok(TrialRow {
                trial,
                seed: key.derived_seed(),
                b_prime,
                b,
                ratio: regularization_ratio(b_prime, b),
                t: vec![t],
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let summary = RatioSummary::from_rows(rows.iter().map(|r| (r.b_prime, r.b, r.ratio)));
    Ok(RegularizationResult {
        anchors: study.anchors,
        truth: study.truth,
        rows,
        summary,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct NoiseRow {
    pub alpha: f64,
    pub trial: usize,
    pub seed: u64,
    pub b_prime: f64,
    pub b_natural: f64,
    pub ratio_natural: Option<f64>,
    pub t_natural: f64,
    pub b_mle: f64,
    pub ratio_mle: Option<f64>,
    pub t_mle: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct NoiseSummaryRow {
    pub alpha: f64,
    pub method: String,
    #[serde(flatten)]
    pub ratio: Quartiles,
}

#[derive(Clone, Debug)]
pub struct NoiseResult {
    pub rows: Vec<NoiseRow>,
    pub summary: Vec<NoiseSummaryRow>,
}

impl NoiseResult {
    pub fn median(&self, alpha: f64, method: Method) -> Option<f64> {
        self.summary
            .iter()
            .find(|s| s.alpha == alpha && s.method == method_label(method))
            .map(|s| s.ratio.median)
    }
}

fn method_label(m: Method) -> &'static str {
    match m {
        Method::ReverseI => "mle",
        other => other.name(),
    }
}

/// Ratios of natural projection and Gaussian maximum likelihood (the
/// reverse I-projection of the sample covariance) under observation noise.
///
/// Trial `i` reuses the same head samples and the same standardized noise
/// draws for every `α`.
pub fn experiment_noise(cfg: &NoiseConfig, seed: u64) -> Result<NoiseResult> {
    cfg.validate()?;
    let study = build_study(&cfg.aquifer, &cfg.anchors, &cfg.target, cfg.anchor_q, seed)?;
    let seg = GeodesicSegment64::new(study.anchors[0].clone(), study.anchors[1].clone())?;
    let jobs: Vec<(f64, usize)> = cfg
        .alphas
        .iter()
        .flat_map(|&a| (0..cfg.trials).map(move |t| (a, t)))
        .collect();
    let rows = jobs
        .into_par_iter()
        .map(|(alpha, trial)| {
            let key = StreamKey::new(seed, trial_domain(trial));
            let noise = NoiseSpec::new(alpha, study.truth.clone())?;
            let noise = (alpha > 0.0).then_some(&noise);
            let est = study.target_model.covariance(cfg.target_q, key, noise)?;
            let c = est.matrix();
            let b_prime = natural_distance(c, &study.truth)?;
            let nat = project(Method::Natural, &seg, c)?;
            let mle = project(Method::ReverseI, &seg, c)?;
            let b_natural = natural_distance(&nat.projected, &study.truth)?;
            let b_mle = natural_distance(&mle.projected, &study.truth)?;
            Ok(NoiseRow {
                alpha,
                trial,
                seed: key.derived_seed(),
                b_prime,
                b_natural,
                ratio_natural: regularization_ratio(b_prime, b_natural),
                t_natural: nat.t,
                b_mle,
                ratio_mle: regularization_ratio(b_prime, b_mle),
                t_mle: mle.t,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let mut summary = Vec::new();
    for &alpha in &cfg.alphas {
        let at: Vec<&NoiseRow> = rows.iter().filter(|r| r.alpha == alpha).collect();
        for method in [Method::Natural, Method::ReverseI] {
            let ratios: Vec<f64> = at
                .iter()
                .filter_map(|r| match method {
                    Method::Natural => r.ratio_natural,
                    _ => r.ratio_mle,
                })
                .collect();
            summary.push(NoiseSummaryRow {
                alpha,
                method: method_label(method).into(),
                ratio: Quartiles::of(&ratios),
            });
        }
    }
    Ok(NoiseResult { rows, summary })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct MultiparamRow {
    pub trial: usize,
    pub seed: u64,
    pub b_prime: f64,
    pub b: f64,
    pub ratio: Option<f64>,
    pub t: Vec<f64>,
    pub sweeps: usize,
    pub converged: bool,
    /// objective trace never increased
    pub monotone: bool,
    pub objective_trace: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct ContourPoint {
    pub t1: f64,
    pub t2: f64,
    /// `None` where `φ(t₁,t₂)` is numerically not positive definite
    pub to_estimate: Option<f64>,
    pub to_truth: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct MultiparamSummary {
    #[serde(flatten)]
    pub ratios: RatioSummary,
    pub sweep_budget: usize,
    /// fraction of trials converged within the sweep budget
    pub converged_within_budget: f64,
    pub all_monotone: bool,
}

#[derive(Clone, Debug)]
pub struct MultiparamResult {
    pub anchors: Vec<SpdMatrix64>,
    pub truth: SpdMatrix64,
    pub rows: Vec<MultiparamRow>,
    pub contour: Vec<ContourPoint>,
    pub summary: MultiparamSummary,
}

pub fn is_non_increasing(trace: &[f64]) -> bool {
    trace.windows(2).all(|w| w[1] <= w[0])
}

/// One coordinate-descent trial against a known truth.
pub fn multiparam_trial(
    tree: &FamilyTree64,
    truth: &SpdMatrix64,
    estimate: &SpdMatrix64,
    descent: &DescentConfig,
) -> Result<(f64, f64, geocov::DescentResult<f64>)> {
    let b_prime = natural_distance(estimate, truth)?;
    let res = coordinate_descent(tree, estimate, descent)?;
    let b = natural_distance(&res.projected, truth)?;
    Ok((b_prime, b, res))
}

/// `d(Â, φ(t₁,t₂))` and `d(A, φ(t₁,t₂))` over a rectangular grid.
pub fn contour_grid(
    tree: &FamilyTree64,
    estimate: &SpdMatrix64,
    truth: &SpdMatrix64,
    spec: &ContourSpec,
) -> Result<Vec<ContourPoint>> {
    let axis = |r: [f64; 2], i: usize| r[0] + (r[1] - r[0]) * i as f64 / (spec.steps - 1) as f64;
    let cells: Vec<(usize, usize)> = (0..spec.steps)
        .flat_map(|i| (0..spec.steps).map(move |j| (i, j)))
        .collect();
    cells
        .into_par_iter()
        .map(|(i, j)| {
            let (t1, t2) = (axis(spec.t1, i), axis(spec.t2, j));
            let (to_estimate, to_truth) = match tree.eval(&[t1, t2]) {
                Ok(p) => (
                    Some(natural_distance(estimate, &p)?),
                    Some(natural_distance(truth, &p)?),
                ),
                Err(GeoError::NotPositiveDefinite { .. }) => (None, None),
                Err(e) => return Err(e.into()),
            };
            Ok(ContourPoint {
                t1,
                t2,
                to_estimate,
                to_truth,
            })
        })
        .collect()
}

/// Natural-distance coordinate descent on the unbalanced family
/// `A₁ → A₂ → A₃`.
pub fn experiment_multiparam(cfg: &MultiparamConfig, seed: u64) -> Result<MultiparamResult> {
    cfg.validate()?;
    let study = build_study(&cfg.aquifer, &cfg.anchors, &cfg.target, cfg.anchor_q, seed)?;
    let tree = build_tree(study.anchors.clone(), TreeShape::Unbalanced)?;
    let estimate = |trial: usize| -> Result<(StreamKey, SpdMatrix64)> {
        let key = StreamKey::new(seed, trial_domain(trial));
        let est = study.target_model.covariance(cfg.target_q, key, None)?;
        Ok((key, est.matrix().clone()))
    };
    let rows = (0..cfg.trials)
        .into_par_iter()
        .map(|trial| {
            let (key, est) = estimate(trial)?;
            let (b_prime, b, res) = multiparam_trial(&tree, &study.truth, &est, &cfg.descent)?;
            Ok(MultiparamRow {
                trial,
                seed: key.derived_seed(),
                b_prime,
                b,
                ratio: regularization_ratio(b_prime, b),
                t: res.params.clone(),
                sweeps: res.outer_iters,
                converged: res.converged,
                monotone: is_non_increasing(&res.objective_trace),
                objective_trace: res.objective_trace,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let contour = contour_grid(&tree, &estimate(0)?.1, &study.truth, &cfg.contour)?;
    let within = rows
        .iter()
        .filter(|r| r.converged && r.sweeps <= cfg.sweep_budget)
        .count();
    let summary = MultiparamSummary {
        ratios: RatioSummary::from_rows(rows.iter().map(|r| (r.b_prime, r.b, r.ratio))),
        sweep_budget: cfg.sweep_budget,
        converged_within_budget: within as f64 / rows.len() as f64,
        all_monotone: rows.iter().all(|r| r.monotone),
    };
    Ok(MultiparamResult {
        anchors: study.anchors,
        truth: study.truth,
        rows,
        contour,
        summary,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct FlatRow {
    pub t: f64,
    /// `None` where `(1−t)A₁ + tA₂` is not positive definite
    pub flat: Option<f64>,
    pub geodesic: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct FlatSummary {
    /// maximal runs of grid points where the flat family is undefined
    pub undefined_intervals: Vec<[f64; 2]>,
    pub flat_nonconvex: bool,
    pub geodesic_unimodal: bool,
    pub geodesic_argmin: f64,
}

#[derive(Clone, Debug)]
pub struct FlatResult {
    pub rows: Vec<FlatRow>,
    pub summary: FlatSummary,
}

/// True when the sequence decreases (weakly) and then increases (weakly).
pub fn is_unimodal(values: &[f64]) -> bool {
    let scale = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let tol = 1e-12 * scale;
    let mut rising = false;
    for w in values.windows(2) {
        if w[1] > w[0] + tol {
            rising = true;
        } else if rising && w[1] < w[0] - tol {
            return false;
        }
    }
    values.iter().all(|v| v.is_finite())
}

/// Distance from `target` along the flat and the geodesic family through
/// `a1`, `a2` over a uniform t-grid.
pub fn flat_vs_geodesic_grid(
    a1: &SpdMatrix64,
    a2: &SpdMatrix64,
    target: &SpdMatrix64,
    t_min: f64,
    t_max: f64,
    steps: usize,
) -> Result<FlatResult> {
    let seg = GeodesicSegment64::new(a1.clone(), a2.clone())?;
    let rows = (0..steps)
        .map(|i| {
            let t = t_min + (t_max - t_min) * i as f64 / (steps - 1) as f64;
            let m = a1.as_matrix() * (1.0 - t) + a2.as_matrix() * t;
            let flat = match SpdMatrix64::new(m) {
                Ok(p) => Some(natural_distance(target, &p)?),
                Err(_) => None,
            };
            Ok(FlatRow {
                t,
                flat,
                geodesic: distance_to_geodesic_point(&seg, target, t)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let mut undefined_intervals = Vec::new();
    let mut start: Option<f64> = None;
    for (i, r) in rows.iter().enumerate() {
        match (r.flat, start) {
            (None, None) => start = Some(r.t),
            (Some(_), Some(s)) => {
                undefined_intervals.push([s, rows[i - 1].t]);
                start = None;
            }
            _ => {}
        }
    }
    if let Some(s) = start {
        undefined_intervals.push([s, rows[rows.len() - 1].t]);
    }
    let flat_nonconvex = rows
        .windows(3)
        .any(|w| match (w[0].flat, w[1].flat, w[2].flat) {
            (Some(a), Some(b), Some(c)) => a - 2.0 * b + c < -1e-12 * b.abs().max(1.0),
            _ => false,
        });
    let geo: Vec<f64> = rows.iter().map(|r| r.geodesic).collect();
    let argmin = rows
        .iter()
        .min_by(|a, b| a.geodesic.total_cmp(&b.geodesic))
        .map(|r| r.t)
        .unwrap_or(f64::NAN);
    Ok(FlatResult {
        summary: FlatSummary {
            undefined_intervals,
            flat_nonconvex,
            geodesic_unimodal: is_unimodal(&geo),
            geodesic_argmin: argmin,
        },
        rows,
    })
}

pub fn flat_vs_geodesic(cfg: &FlatConfig, seed: u64) -> Result<FlatResult> {
    cfg.validate()?;
    let study = build_study(&cfg.aquifer, &cfg.anchors, &cfg.target, cfg.anchor_q, seed)?;
    flat_vs_geodesic_grid(
        &study.anchors[0],
        &study.anchors[1],
        &study.truth,
        cfg.t_min,
        cfg.t_max,
        cfg.steps,
    )
}
