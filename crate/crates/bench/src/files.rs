//! Problems and sketched matrices on disk: Matrix Market payloads plus a
//! JSON sidecar naming them. Paths inside a sidecar are relative to it.

use std::fs;
use std::path::{Path, PathBuf};

use mihs_core::problems::ProblemMeta;
use mihs_core::{DenseMatrix, Problem, SketchKind};
use serde::{Deserialize, Serialize};

use crate::error::{io_err, BenchError, Result};
use crate::mtx::{read_matrix, read_vector, write_matrix, write_vector, Layout};

pub const PROBLEM_SIDECAR: &str = "problem.json";
pub const SKETCH_SIDECAR: &str = "sketch.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemSidecar {
    pub a: PathBuf,
    pub b: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x_true: Option<PathBuf>,
    #[serde(default)]
    pub lambda: f64,
    #[serde(default)]
    pub meta: ProblemMeta,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SketchSidecar {
    pub kind: SketchKind,
    pub m: usize,
    /// Rows of the matrix that was sketched.
    pub n: usize,
    pub seed: u64,
    pub matrix: PathBuf,
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    serde_json::from_str(&text).map_err(|source| BenchError::Json {
        path: path.to_path_buf(),
        source,
    })
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|source| BenchError::Json {
        path: path.to_path_buf(),
        source,
    })?;
    text.push('\n');
    fs::write(path, text).map_err(io_err(path))
}

fn sibling(sidecar: &Path, rel: &Path) -> PathBuf {
    match sidecar.parent() {
        Some(dir) if rel.is_relative() => dir.join(rel),
        _ => rel.to_path_buf(),
    }
}

/// Loads a problem from its sidecar (or from a directory holding
/// `problem.json`).
pub fn read_problem(path: impl AsRef<Path>) -> Result<Problem> {
    let mut path = path.as_ref().to_path_buf();
    if path.is_dir() {
        path.push(PROBLEM_SIDECAR);
    }
    let side: ProblemSidecar = read_json(&path)?;
    let a = read_matrix(sibling(&path, &side.a))?;
    let b = read_vector(sibling(&path, &side.b))?;
    let mut p = Problem::new(a, b, side.lambda)?;
    if let Some(x) = &side.x_true {
        p = p.with_x_true(read_vector(sibling(&path, x))?)?;
    }
    p.meta = side.meta;
    Ok(p)
}

/// Writes `A.mtx`, `b.mtx`, `x_true.mtx` (when known) and `problem.json`
/// into `dir`, creating it if needed. Returns the sidecar path.
pub fn write_problem(dir: impl AsRef<Path>, p: &Problem) -> Result<PathBuf> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    write_matrix(dir.join("A.mtx"), &p.a, Layout::Array)?;
    write_vector(dir.join("b.mtx"), &p.b)?;
    if let Some(x) = &p.x_true {
        write_vector(dir.join("x_true.mtx"), x)?;
    }
    let side = ProblemSidecar {
        a: "A.mtx".into(),
        b: "b.mtx".into(),
        x_true: p.x_true.as_ref().map(|_| "x_true.mtx".into()),
        lambda: p.lambda,
        meta: p.meta.clone(),
    };
    let path = dir.join(PROBLEM_SIDECAR);
    write_json(&path, &side)?;
    Ok(path)
}

/// Writes `SA.mtx` and `sketch.json` into `dir`.
pub fn write_sketched(dir: impl AsRef<Path>, sa: &DenseMatrix, side: &SketchSidecar) -> Result<PathBuf> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    write_matrix(dir.join(&side.matrix), sa, Layout::Array)?;
    let path = dir.join(SKETCH_SIDECAR);
    write_json(&path, side)?;
    Ok(path)
}

pub fn read_sketched(path: impl AsRef<Path>) -> Result<(DenseMatrix, SketchSidecar)> {
    let mut path = path.as_ref().to_path_buf();
    if path.is_dir() {
        path.push(SKETCH_SIDECAR);
    }
    let side: SketchSidecar = read_json(&path)?;
    let sa = read_matrix(sibling(&path, &side.matrix))?;
    Ok((sa, side))
}
