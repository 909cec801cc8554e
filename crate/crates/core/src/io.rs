//! Reading and writing matrices and family definitions.
//!
//! Matrices are stored either as JSON `{"dim": n, "rows": [[...], ...]}` or as
//! headerless CSV with one row per line. A family file is JSON
//! `{"shape": "unbalanced" | "balanced" | "((1,2),3)", "anchors": [...]}` where
//! every anchor is a path (relative to the family file) or an inline matrix.

use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{GeoError, Result};
use crate::family::{build_tree, FamilyTree, TreeShape};
use crate::manifold::SpdMatrix;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MatrixFile {
    pub dim: usize,
    pub rows: Vec<Vec<f64>>,
}

impl MatrixFile {
    pub fn from_matrix(m: &DMatrix<f64>) -> Self {
        Self {
            dim: m.nrows(),
            rows: m.row_iter().map(|r| r.iter().copied().collect()).collect(),
        }
    }

    pub fn to_matrix(&self) -> Result<DMatrix<f64>> {
        rows_to_matrix(&self.rows, Some(self.dim))
    }
}

fn rows_to_matrix(rows: &[Vec<f64>], dim: Option<usize>) -> Result<DMatrix<f64>> {
    let n = rows.len();
    if n == 0 {
        return Err(GeoError::Parse("matrix has no rows".into()));
    }
    if let Some(d) = dim {
        if d != n {
            return Err(GeoError::DimensionMismatch {
                expected: d,
                found: n,
            });
        }
    }
    for r in rows {
        if r.len() != n {
            return Err(GeoError::NotSquare {
                rows: n,
                cols: r.len(),
            });
        }
    }
    Ok(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
}

/// Parses a matrix from JSON or CSV text, deciding by the first character.
pub fn parse_matrix(text: &str) -> Result<DMatrix<f64>> {
    let trimmed = text.trim_start();
    if trimmed.starts_with('{') {
        let f: MatrixFile =
            serde_json::from_str(trimmed).map_err(|e| GeoError::Parse(e.to_string()))?;
        f.to_matrix()
    } else {
        let mut rows = Vec::new();
        for (lineno, line) in trimmed.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let row = line
                .split(',')
                .map(|v| v.trim().parse::<f64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| GeoError::Parse(format!("line {}: {e}", lineno + 1)))?;
            rows.push(row);
        }
        rows_to_matrix(&rows, None)
    }
}

pub fn read_matrix(path: &Path) -> Result<DMatrix<f64>> {
    parse_matrix(&fs::read_to_string(path)?)
}

pub fn read_spd(path: &Path) -> Result<SpdMatrix<f64>> {
    SpdMatrix::new(read_matrix(path)?)
}

/// Writes JSON unless the extension is `.csv`.
pub fn write_matrix(path: &Path, m: &DMatrix<f64>) -> Result<()> {
    let is_csv = path
        .extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("csv"));
    let text = if is_csv {
        let mut s = String::new();
        for r in m.row_iter() {
            let cells: Vec<String> = r.iter().map(|v| format!("{v:e}")).collect();
            s.push_str(&cells.join(","));
            s.push('\n');
        }
        s
    } else {
        serde_json::to_string_pretty(&MatrixFile::from_matrix(m))
            .map_err(|e| GeoError::Parse(e.to_string()))?
    };
    fs::write(path, text)?;
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum AnchorSpec {
    Path(PathBuf),
    Inline(MatrixFile),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FamilyFile {
    pub shape: String,
    pub anchors: Vec<AnchorSpec>,
}

impl FamilyFile {
    /// Resolves anchors (paths relative to `base_dir`) and builds the tree.
    pub fn build(&self, base_dir: &Path) -> Result<FamilyTree<f64>> {
        let anchors = self
            .anchors
            .iter()
            .map(|a| match a {
                AnchorSpec::Path(p) => read_spd(&base_dir.join(p)),
                AnchorSpec::Inline(m) => SpdMatrix::new(m.to_matrix()?),
            })
            .collect::<Result<Vec<_>>>()?;
        build_tree(anchors, TreeShape::parse(&self.shape)?)
    }
}

pub fn read_family(path: &Path) -> Result<FamilyTree<f64>> {
    let text = fs::read_to_string(path)?;
    let f: FamilyFile = serde_json::from_str(&text).map_err(|e| GeoError::Parse(e.to_string()))?;
    f.build(path.parent().unwrap_or(Path::new(".")))
}
