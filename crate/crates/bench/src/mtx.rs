//! Matrix Market (`.mtx`) files: real or integer, general, in array or
//! coordinate layout. Values are written with 17 significant digits, which
//! round-trips every `f64` exactly.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use mihs_core::DenseMatrix;

use crate::error::{io_err, BenchError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Layout {
    Array,
    Coordinate,
}

pub fn read_matrix(path: impl AsRef<Path>) -> Result<DenseMatrix> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    parse_matrix(&text).map_err(|(line, msg)| BenchError::Parse {
        path: path.to_path_buf(),
        line,
        msg,
    })
}

/// Reads an `n × 1` (or `1 × n`) matrix as a vector.
pub fn read_vector(path: impl AsRef<Path>) -> Result<Vec<f64>> {
    let path = path.as_ref();
    let m = read_matrix(path)?;
    if m.cols() != 1 && m.rows() != 1 {
        return Err(BenchError::Parse {
            path: path.to_path_buf(),
            line: 0,
            msg: format!("expected a vector, found a {}x{} matrix", m.rows(), m.cols()),
        });
    }
    Ok(m.into_vec())
}

pub fn write_matrix(path: impl AsRef<Path>, m: &DenseMatrix, layout: Layout) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, format_matrix(m, layout)).map_err(io_err(path))
}

pub fn write_vector(path: impl AsRef<Path>, v: &[f64]) -> Result<()> {
    let m = DenseMatrix::from_col_major(v.len(), 1, v.to_vec())?;
    write_matrix(path, &m, Layout::Array)
}

pub fn format_matrix(m: &DenseMatrix, layout: Layout) -> String {
    let (rows, cols) = m.shape();
    let mut out = String::new();
    match layout {
        Layout::Array => {
            out.push_str("%%MatrixMarket matrix array real general\n");
            let _ = writeln!(out, "{rows} {cols}");
            for v in m.as_slice() {
                let _ = writeln!(out, "{v:.16e}");
            }
        }
        Layout::Coordinate => {
            out.push_str("%%MatrixMarket matrix coordinate real general\n");
            let _ = writeln!(out, "{rows} {cols} {}", m.nnz());
            for j in 0..cols {
                for (i, v) in m.col(j).iter().enumerate() {
                    if *v != 0.0 {
                        let _ = writeln!(out, "{} {} {v:.16e}", i + 1, j + 1);
                    }
                }
            }
        }
    }
    out
}

type ParseResult<T> = std::result::Result<T, (usize, String)>;

/// Parses file contents; errors carry the 1-based line number.
pub fn parse_matrix(text: &str) -> ParseResult<DenseMatrix> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
    let (_, banner) = lines.next().ok_or((1, "empty file".to_string()))?;
    let layout = parse_banner(banner).map_err(|msg| (1, msg))?;

    let mut body = lines.filter(|(_, l)| {
        let t = l.trim();
        !t.is_empty() && !t.starts_with('%')
    });
    let (dim_line, dims) = body.next().ok_or((1, "missing dimension line".to_string()))?;
    let dims = parse_usizes(dims).map_err(|msg| (dim_line, msg))?;
    let mut m;
    match layout {
        Layout::Array => {
            let [rows, cols] = dims[..] else {
                return Err((
                    dim_line,
                    format!("array dimension line needs 2 integers, found {}", dims.len()),
                ));
            };
            let total = rows * cols;
            let mut data = Vec::with_capacity(total);
            for (no, line) in body.by_ref() {
                if data.len() == total {
                    return Err((no, "more entries than rows*cols".to_string()));
                }
                data.push(parse_value(line.trim()).map_err(|msg| (no, msg))?);
            }
            if data.len() != total {
                return Err((dim_line, format!("expected {total} entries, found {}", data.len())));
            }
            m = DenseMatrix::from_col_major(rows, cols, data).map_err(|e| (dim_line, e.to_string()))?;
        }
        Layout::Coordinate => {
            let [rows, cols, nnz] = dims[..] else {
                return Err((
                    dim_line,
                    format!("coordinate dimension line needs 3 integers, found {}", dims.len()),
                ));
            };
            m = DenseMatrix::zeros(rows, cols);
            let mut seen = 0;
            for (no, line) in body {
                if seen == nnz {
                    return Err((no, "more entries than declared".to_string()));
                }
                let mut it = line.split_whitespace();
                let (Some(i), Some(j), Some(v), None) = (it.next(), it.next(), it.next(), it.next()) else {
                    return Err((no, "coordinate entry must be `row col value`".to_string()));
                };
                let i = parse_index(i, rows).map_err(|msg| (no, msg))?;
                let j = parse_index(j, cols).map_err(|msg| (no, msg))?;
                m[(i, j)] = parse_value(v).map_err(|msg| (no, msg))?;
                seen += 1;
            }
            if seen != nnz {
                return Err((dim_line, format!("declared {nnz} entries, found {seen}")));
            }
        }
    }
    Ok(m)
}

fn parse_banner(line: &str) -> std::result::Result<Layout, String> {
    let words: Vec<String> = line.split_whitespace().map(|w| w.to_ascii_lowercase()).collect();
    if words.first().map(String::as_str) != Some("%%matrixmarket") {
        return Err("missing %%MatrixMarket banner".into());
    }
    let [_, object, format, field, symmetry] = &words[..] else {
        return Err("banner must have 5 fields".into());
    };
    if object != "matrix" {
        return Err(format!("unsupported object `{object}`"));
    }
    let layout = match format.as_str() {
        "array" => Layout::Array,
        "coordinate" => Layout::Coordinate,
        other => return Err(format!("unsupported format `{other}`")),
    };
    if field != "real" && field != "integer" {
        return Err(format!("unsupported field `{field}`"));
    }
    if symmetry != "general" {
        return Err(format!("unsupported symmetry `{symmetry}`"));
    }
    Ok(layout)
}

fn parse_usizes(line: &str) -> std::result::Result<Vec<usize>, String> {
    line.split_whitespace()
        .map(|w| w.parse::<usize>().map_err(|_| format!("bad dimension `{w}`")))
        .collect()
}

fn parse_index(w: &str, bound: usize) -> std::result::Result<usize, String> {
    match w.parse::<usize>() {
        Ok(k) if k >= 1 && k <= bound => Ok(k - 1),
        _ => Err(format!("index `{w}` outside 1..={bound}")),
    }
}

fn parse_value(w: &str) -> std::result::Result<f64, String> {
    w.parse::<f64>().map_err(|_| format!("bad value `{w}`"))
}
