use std::fs;
use std::path::{Path, PathBuf};

use geocov::io::read_family;
use geocov::{
    coordinate_descent, io::read_spd, project, DescentConfig, DescentResult, Method,
    ProjectionResult,
};
use geocov_aquifer::experiments::{anchor_domain, FlatConfig, NoiseConfig};
use geocov_aquifer::report::{
    write_flat, write_json, write_multiparam, write_noise, write_regularization,
};
use geocov_aquifer::{
    build_anchor, experiment_multiparam, experiment_noise, experiment_regularization,
    flat_vs_geodesic, AquiferConfig, Kernel, MultiparamConfig, RegularizationConfig, StreamKey,
};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::args::{ExperimentKind, MethodArg, Overrides};
use crate::error::{io_err, CliError, Result};
use crate::local::{self, LocalAnalysisConfig};

pub const MANIFEST: &str = "manifest.json";

/// Record of one batch run, written next to its outputs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct RunManifest {
    pub command: String,
    /// fully resolved configuration
    pub config: Value,
    pub seed: u64,
    pub version: String,
    /// output files, relative to the manifest's directory
    pub outputs: Vec<String>,
}

impl RunManifest {
    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(io_err(path))?;
        serde_json::from_str(&text)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }
}

pub fn version() -> String {
    format!("geocov {}", env!("CARGO_PKG_VERSION"))
}

fn read_config<T: DeserializeOwned + Default>(path: Option<&Path>) -> Result<T> {
    match path {
        None => Ok(T::default()),
        Some(p) => {
            let text = fs::read_to_string(p).map_err(io_err(p))?;
            serde_json::from_str(&text)
                .map_err(|e| CliError::Config(format!("{}: {e}", p.display())))
        }
    }
}

fn from_value<T: DeserializeOwned>(v: &Value) -> Result<T> {
    serde_json::from_value(v.clone()).map_err(|e| CliError::Config(e.to_string()))
}

fn to_value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("configs serialize")
}

/// Either a projection result per method or a descent result per method.
#[derive(Debug, Serialize)]
#[serde(untagged)]
pub enum ProjectOutput {
    Projection(ProjectionResult<f64>),
    Projections(Vec<ProjectionResult<f64>>),
    Descent(DescentResult<f64>),
    Descents(Vec<DescentResult<f64>>),
}

/// Projects the covariance in `cov_path` onto the family in `family_path`.
/// One-parameter families use the scalar solvers, larger ones coordinate
/// descent with the settings in `descent_path`.
pub fn cmd_project(
    family_path: &Path,
    cov_path: &Path,
    method: MethodArg,
    descent_path: Option<&Path>,
) -> Result<ProjectOutput> {
    let tree = read_family(family_path)?;
    let c = read_spd(cov_path)?;
    let methods = method.methods();
    if tree.num_params() == 1 {
        let seg = tree.node_segment(&[0.0], 0)?;
        let mut res = methods
            .iter()
            .map(|&m| project(m, &seg, &c))
            .collect::<geocov::Result<Vec<_>>>()?;
        return Ok(if method == MethodArg::All {
            ProjectOutput::Projections(res)
        } else {
            ProjectOutput::Projection(res.remove(0))
        });
    }
    let base: DescentConfig = read_config(descent_path)?;
    let mut res = methods
        .iter()
        .map(|&objective| coordinate_descent(&tree, &c, &DescentConfig { objective, ..base }))
        .collect::<geocov::Result<Vec<_>>>()?;
    Ok(if method == MethodArg::All {
        ProjectOutput::Descents(res)
    } else {
        ProjectOutput::Descent(res.remove(0))
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct BuildAnchorsConfig {
    #[serde(flatten)]
    pub aquifer: AquiferConfig,
    /// one anchor per kernel; the aquifer kernel when empty
    #[serde(default)]
    pub anchors: Vec<Kernel>,
    #[serde(default = "default_anchor_q")]
    pub q: usize,
}

fn default_anchor_q() -> usize {
    100_000
}

impl Default for BuildAnchorsConfig {
    fn default() -> Self {
        Self {
            aquifer: AquiferConfig::default(),
            anchors: Vec::new(),
            q: default_anchor_q(),
        }
    }
}

fn resolve_build_anchors(path: Option<&Path>, q: Option<usize>) -> Result<Value> {
    let mut cfg: BuildAnchorsConfig = read_config(path)?;
    if cfg.anchors.is_empty() {
        cfg.anchors.push(cfg.aquifer.kernel);
    }
    if let Some(q) = q {
        cfg.q = q;
    }
    cfg.aquifer.validate()?;
    cfg.anchors.iter().try_for_each(Kernel::validate)?;
    Ok(to_value(&cfg))
}

fn run_build_anchors(config: &Value, seed: u64, out: &Path) -> Result<Vec<PathBuf>> {
    let cfg: BuildAnchorsConfig = from_value(config)?;
    let mut names = Vec::new();
    for (i, k) in cfg.anchors.iter().enumerate() {
        let a = build_anchor(
            &cfg.aquifer,
            k,
            cfg.q,
            StreamKey::new(seed, anchor_domain(i)),
        )?;
        let p = out.join(format!("anchor{}.json", i + 1));
        geocov::io::write_matrix(&p, a.as_matrix())?;
        names.push(p);
    }
    if names.len() >= 2 {
        let family = geocov::io::FamilyFile {
            shape: "unbalanced".into(),
            anchors: names
                .iter()
                .map(|p| geocov::io::AnchorSpec::Path(p.file_name().unwrap().into()))
                .collect(),
        };
        let p = out.join("family.json");
        write_json(&p, &family)?;
        names.push(p);
    }
    Ok(names)
}

fn not_used(flag: &str, kind: ExperimentKind) -> CliError {
    CliError::Config(format!(
        "--{flag} does not apply to the {} experiment",
        kind.name()
    ))
}

fn single_method(m: MethodArg) -> Result<Method> {
    match m {
        MethodArg::All => Err(CliError::Config(
            "--method all is only meaningful for project".into(),
        )),
        other => Ok(other.methods()[0]),
    }
}

/// Reads the experiment's config (defaults when absent), applies the
/// command-line overrides and validates the result.
pub fn resolve_experiment(
    kind: ExperimentKind,
    path: Option<&Path>,
    ov: &Overrides,
) -> Result<Value> {
    let reject = |flag: &str, set: bool| {
        if set {
            Err(not_used(flag, kind))
        } else {
            Ok(())
        }
    };
    match kind {
        ExperimentKind::Regularization => {
            let mut c: RegularizationConfig = read_config(path)?;
            reject("alpha-grid", ov.alpha_grid.is_some())?;
            reject("method", ov.method.is_some())?;
            c.trials = ov.trials.unwrap_or(c.trials);
            c.target_q = ov.q.unwrap_or(c.target_q);
            c.anchor_q = ov.anchor_q.unwrap_or(c.anchor_q);
            c.validate()?;
            Ok(to_value(&c))
        }
        ExperimentKind::Noise => {
            let mut c: NoiseConfig = read_config(path)?;
            reject("method", ov.method.is_some())?;
            c.trials = ov.trials.unwrap_or(c.trials);
            c.target_q = ov.q.unwrap_or(c.target_q);
            c.anchor_q = ov.anchor_q.unwrap_or(c.anchor_q);
            if let Some(a) = &ov.alpha_grid {
                c.alphas = a.clone();
            }
            c.validate()?;
            Ok(to_value(&c))
        }
        ExperimentKind::Multiparam => {
            let mut c: MultiparamConfig = read_config(path)?;
            reject("alpha-grid", ov.alpha_grid.is_some())?;
            c.trials = ov.trials.unwrap_or(c.trials);
            c.target_q = ov.q.unwrap_or(c.target_q);
            c.anchor_q = ov.anchor_q.unwrap_or(c.anchor_q);
            if let Some(m) = ov.method {
                c.descent.objective = single_method(m)?;
            }
            c.validate()?;
            Ok(to_value(&c))
        }
        ExperimentKind::FlatVsGeodesic => {
            let mut c: FlatConfig = read_config(path)?;
            reject("alpha-grid", ov.alpha_grid.is_some())?;
            reject("method", ov.method.is_some())?;
            reject("trials", ov.trials.is_some())?;
            reject("q", ov.q.is_some())?;
            c.anchor_q = ov.anchor_q.unwrap_or(c.anchor_q);
            c.validate()?;
            Ok(to_value(&c))
        }
        ExperimentKind::LocalAnalysis => {
            let c: LocalAnalysisConfig = read_config(path)?;
            reject("alpha-grid", ov.alpha_grid.is_some())?;
            reject("method", ov.method.is_some())?;
            reject("trials", ov.trials.is_some())?;
            reject("q", ov.q.is_some())?;
            reject("anchor-q", ov.anchor_q.is_some())?;
            c.validate()?;
            Ok(to_value(&c))
        }
    }
}

fn run_experiment(
    kind: ExperimentKind,
    config: &Value,
    seed: u64,
    out: &Path,
) -> Result<Vec<PathBuf>> {
    Ok(match kind {
        ExperimentKind::Regularization => {
            let r = experiment_regularization(&from_value(config)?, seed)?;
            write_regularization(out, &r)?
        }
        ExperimentKind::Noise => write_noise(out, &experiment_noise(&from_value(config)?, seed)?)?,
        ExperimentKind::Multiparam => {
            write_multiparam(out, &experiment_multiparam(&from_value(config)?, seed)?)?
        }
        ExperimentKind::FlatVsGeodesic => {
            write_flat(out, &flat_vs_geodesic(&from_value(config)?, seed)?)?
        }
        ExperimentKind::LocalAnalysis => {
            local::write(out, &local::run(&from_value(config)?, seed)?)?
        }
    })
}

/// What a manifest can re-execute.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Job {
    BuildAnchors,
    Experiment(ExperimentKind),
}

impl Job {
    pub fn command(self) -> String {
        match self {
            Job::BuildAnchors => "build-anchors".into(),
            Job::Experiment(k) => format!("experiment {}", k.name()),
        }
    }

    pub fn parse(command: &str) -> Result<Self> {
        let unknown = || CliError::Config(format!("unknown manifest command {command:?}"));
        match command.split_once(' ') {
            None if command == "build-anchors" => Ok(Job::BuildAnchors),
            Some(("experiment", name)) => ExperimentKind::from_name(name)
                .map(Job::Experiment)
                .ok_or_else(unknown),
            _ => Err(unknown()),
        }
    }
}

/// Runs a resolved job into `out` and writes its manifest there.
pub fn execute(job: Job, config: Value, seed: u64, out: &Path) -> Result<RunManifest> {
    fs::create_dir_all(out).map_err(io_err(out))?;
    let paths = match job {
        Job::BuildAnchors => run_build_anchors(&config, seed, out)?,
        Job::Experiment(k) => run_experiment(k, &config, seed, out)?,
    };
    let manifest = RunManifest {
        command: job.command(),
        config,
        seed,
        version: version(),
        outputs: paths
            .iter()
            .map(|p| p.file_name().unwrap().to_string_lossy().into_owned())
            .collect(),
    };
    write_json(&out.join(MANIFEST), &manifest)?;
    Ok(manifest)
}

pub fn cmd_build_anchors(
    config: Option<&Path>,
    q: Option<usize>,
    seed: u64,
    out: &Path,
) -> Result<RunManifest> {
    execute(
        Job::BuildAnchors,
        resolve_build_anchors(config, q)?,
        seed,
        out,
    )
}

pub fn cmd_experiment(
    kind: ExperimentKind,
    config: Option<&Path>,
    overrides: &Overrides,
    seed: u64,
    out: &Path,
) -> Result<RunManifest> {
    let resolved = resolve_experiment(kind, config, overrides)?;
    execute(Job::Experiment(kind), resolved, seed, out)
}

/// Re-executes a manifest, into its own directory unless `out` is given.
pub fn cmd_rerun(manifest: &Path, out: Option<&Path>) -> Result<RunManifest> {
    let m = RunManifest::read(manifest)?;
    let job = Job::parse(&m.command)?;
    let dir = match out {
        Some(d) => d.to_path_buf(),
        None => manifest.parent().unwrap_or(Path::new(".")).to_path_buf(),
    };
    execute(job, m.config, m.seed, &dir)
}
