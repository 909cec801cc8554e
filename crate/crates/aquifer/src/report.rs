//! CSV tables and JSON summaries for the experiments. Undefined values
//! (ratio sentinels, rank-deficient flat points) are written as empty cells.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::Result;
use crate::experiments::{
    ContourPoint, FlatResult, MultiparamResult, NoiseResult, RegularizationResult,
};

fn num(v: f64) -> String {
    format!("{v:e}")
}

fn opt(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

fn write_csv(
    path: &Path,
    header: &[&str],
    rows: impl IntoIterator<Item = Vec<String>>,
) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(header)?;
    for r in rows {
        w.write_record(&r)?;
    }
    w.flush()?;
    Ok(())
}

fn write_matrix(path: &Path, m: &geocov::SpdMatrix64) -> Result<()> {
    geocov::io::write_matrix(path, m.as_matrix())?;
    Ok(())
}

/// Writes `trials.csv`, `summary.json`, the anchors and the truth into `dir`.
pub fn write_regularization(dir: &Path, r: &RegularizationResult) -> Result<Vec<PathBuf>> {
    let trials = dir.join("trials.csv");
    write_csv(
        &trials,
        &["trial", "seed", "b_prime", "b", "ratio", "t"],
        r.rows.iter().map(|row| {
            vec![
                row.trial.to_string(),
                row.seed.to_string(),
                num(row.b_prime),
                num(row.b),
                opt(row.ratio),
                num(row.t[0]),
            ]
        }),
    )?;
    let summary = dir.join("summary.json");
    write_json(&summary, &r.summary)?;
    let mut out = vec![trials, summary];
    out.extend(write_matrices(dir, &r.anchors, &r.truth)?);
    Ok(out)
}

fn write_matrices(
    dir: &Path,
    anchors: &[geocov::SpdMatrix64],
    truth: &geocov::SpdMatrix64,
) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for (i, a) in anchors.iter().enumerate() {
        let p = dir.join(format!("anchor{}.json", i + 1));
        write_matrix(&p, a)?;
        out.push(p);
    }
    let p = dir.join("truth.json");
    write_matrix(&p, truth)?;
    out.push(p);
    Ok(out)
}

/// Writes `trials.csv` and the per-α quartiles as `summary.csv` and
/// `summary.json`.
pub fn write_noise(dir: &Path, r: &NoiseResult) -> Result<Vec<PathBuf>> {
    let trials = dir.join("trials.csv");
    write_csv(
        &trials,
        &[
            "alpha",
            "trial",
            "seed",
            "b_prime",
            "b_natural",
            "ratio_natural",
            "t_natural",
            "b_mle",
            "ratio_mle",
            "t_mle",
        ],
        r.rows.iter().map(|row| {
            vec![
                num(row.alpha),
                row.trial.to_string(),
                row.seed.to_string(),
                num(row.b_prime),
                num(row.b_natural),
                opt(row.ratio_natural),
                num(row.t_natural),
                num(row.b_mle),
                opt(row.ratio_mle),
                num(row.t_mle),
            ]
        }),
    )?;
    let summary_csv = dir.join("summary.csv");
    write_csv(
        &summary_csv,
        &[
            "alpha", "method", "count", "min", "q1", "median", "q3", "max", "mean",
        ],
        r.summary.iter().map(|s| {
            let q = &s.ratio;
            vec![
                num(s.alpha),
                s.method.clone(),
                q.count.to_string(),
                num(q.min),
                num(q.q1),
                num(q.median),
                num(q.q3),
                num(q.max),
                num(q.mean),
            ]
        }),
    )?;
    let summary_json = dir.join("summary.json");
    write_json(&summary_json, &r.summary)?;
    Ok(vec![trials, summary_csv, summary_json])
}

pub fn write_contour(path: &Path, grid: &[ContourPoint]) -> Result<()> {
    write_csv(
        path,
        &["t1", "t2", "d_estimate", "d_truth"],
        grid.iter()
            .map(|p| vec![num(p.t1), num(p.t2), opt(p.to_estimate), opt(p.to_truth)]),
    )
}

/// Writes `trials.csv`, `traces.json`, `contour.csv`, `summary.json`, the
/// anchors and the truth.
pub fn write_multiparam(dir: &Path, r: &MultiparamResult) -> Result<Vec<PathBuf>> {
    let trials = dir.join("trials.csv");
    write_csv(
        &trials,
        &[
            "trial",
            "seed",
            "b_prime",
            "b",
            "ratio",
            "t1",
            "t2",
            "sweeps",
            "converged",
            "monotone",
        ],
        r.rows.iter().map(|row| {
            vec![
                row.trial.to_string(),
                row.seed.to_string(),
                num(row.b_prime),
                num(row.b),
                opt(row.ratio),
                num(row.t[0]),
                num(row.t[1]),
                row.sweeps.to_string(),
                row.converged.to_string(),
                row.monotone.to_string(),
            ]
        }),
    )?;
    #[derive(Serialize)]
    struct Trace<'a> {
        trial: usize,
        trace: &'a [f64],
    }
    let traces = dir.join("traces.json");
    let t: Vec<Trace> = r
        .rows
        .iter()
        .map(|row| Trace {
            trial: row.trial,
            trace: &row.objective_trace,
        })
        .collect();
    write_json(&traces, &t)?;
    let contour = dir.join("contour.csv");
    write_contour(&contour, &r.contour)?;
    let summary = dir.join("summary.json");
    write_json(&summary, &r.summary)?;
    let mut out = vec![trials, traces, contour, summary];
    out.extend(write_matrices(dir, &r.anchors, &r.truth)?);
    Ok(out)
}

/// Writes `curves.csv` (`t, flat, geodesic`) and `summary.json`.
pub fn write_flat(dir: &Path, r: &FlatResult) -> Result<Vec<PathBuf>> {
    let curves = dir.join("curves.csv");
    write_csv(
        &curves,
        &["t", "flat", "geodesic"],
        r.rows
            .iter()
            .map(|row| vec![num(row.t), opt(row.flat), num(row.geodesic)]),
    )?;
    let summary = dir.join("summary.json");
    write_json(&summary, &r.summary)?;
    Ok(vec![curves, summary])
}
