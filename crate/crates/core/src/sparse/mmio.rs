//! Matrix Market coordinate (matrices) and array (vectors) formats.
//!
//! Indices are 1-based on disk. Symmetric files hold the lower triangle.

use std::io::{BufRead, Write};

use super::CsrMatrix;
use crate::error::{AmgError, Result};

fn parse_err(line: usize, msg: impl Into<String>) -> AmgError {
    AmgError::Parse {
        line,
        msg: msg.into(),
    }
}

struct Header {
    symmetric: bool,
    array: bool,
}

fn parse_header(line: &str, lineno: usize) -> Result<Header> {
    let toks: Vec<String> = line.split_whitespace().map(|t| t.to_lowercase()).collect();
    if toks.len() != 5 || toks[0] != "%%matrixmarket" || toks[1] != "matrix" {
        return Err(parse_err(lineno, format!("malformed header: {line:?}")));
    }
    let array = match toks[2].as_str() {
        "coordinate" => false,
        "array" => true,
        other => return Err(parse_err(lineno, format!("unsupported format {other:?}"))),
    };
    if toks[3] != "real" && toks[3] != "integer" {
        return Err(parse_err(lineno, format!("unsupported field {:?}", toks[3])));
    }
    let symmetric = match toks[4].as_str() {
        "general" => false,
        "symmetric" => true,
        other => return Err(parse_err(lineno, format!("unsupported symmetry {other:?}"))),
    };
    Ok(Header { symmetric, array })
}

/// Non-comment lines with their 1-based line numbers, after the header.
fn body_lines<R: BufRead>(reader: R) -> Result<(Header, Vec<(usize, String)>)> {
    let mut lines = reader.lines().enumerate();
    let header = match lines.next() {
        Some((_, l)) => parse_header(&l?, 1)?,
        None => return Err(parse_err(1, "empty file")),
    };
    let mut body = Vec::new();
    for (k, l) in lines {
        let l = l?;
        let t = l.trim();
        if t.is_empty() || t.starts_with('%') {
            continue;
        }
        body.push((k + 1, t.to_string()));
    }
    Ok((header, body))
}

fn parse_usize(tok: Option<&str>, line: usize, what: &str) -> Result<usize> {
    tok.ok_or_else(|| parse_err(line, format!("missing {what}")))?
        .parse()
        .map_err(|_| parse_err(line, format!("bad {what}")))
}

fn parse_f64(tok: Option<&str>, line: usize) -> Result<f64> {
    let v: f64 = tok
        .ok_or_else(|| parse_err(line, "missing value"))?
        .parse()
        .map_err(|_| parse_err(line, "bad value"))?;
    if !v.is_finite() {
        return Err(parse_err(line, "non-finite value"));
    }
    Ok(v)
}

pub fn read_matrix<R: BufRead>(reader: R) -> Result<CsrMatrix> {
    let (header, body) = body_lines(reader)?;
    if header.array {
        return Err(parse_err(1, "expected coordinate format for a matrix"));
    }
    let mut it = body.into_iter();
    let (sline, size) = it.next().ok_or_else(|| parse_err(2, "missing size line"))?;
    let mut toks = size.split_whitespace();
    let n_rows = parse_usize(toks.next(), sline, "row count")?;
    let n_cols = parse_usize(toks.next(), sline, "column count")?;
    let nnz = parse_usize(toks.next(), sline, "entry count")?;
    if header.symmetric && n_rows != n_cols {
        return Err(parse_err(sline, "symmetric matrix must be square"));
    }
    let mut entries = Vec::with_capacity(2 * nnz);
    let mut seen = 0;
    for (line, text) in it {
        let mut toks = text.split_whitespace();
        let i = parse_usize(toks.next(), line, "row index")?;
        let j = parse_usize(toks.next(), line, "column index")?;
        let v = parse_f64(toks.next(), line)?;
        if i == 0 || j == 0 || i > n_rows || j > n_cols {
            return Err(parse_err(line, format!("index ({i}, {j}) out of range")));
        }
        if header.symmetric && i < j {
            return Err(parse_err(line, "upper-triangle entry in symmetric file"));
        }
        entries.push((i - 1, j - 1, v));
        if header.symmetric && i != j {
            entries.push((j - 1, i - 1, v));
        }
        seen += 1;
    }
    if seen != nnz {
        return Err(parse_err(
            sline,
            format!("size line promises {nnz} entries, found {seen}"),
        ));
    }
    CsrMatrix::from_triplets(n_rows, n_cols, &entries)
}

/// Write in coordinate format; symmetric matrices are stored as their lower
/// triangle.
pub fn write_matrix<W: Write>(mut w: W, a: &CsrMatrix) -> Result<()> {
    let sym = a.is_symmetric();
    let kind = if sym { "symmetric" } else { "general" };
    writeln!(w, "%%MatrixMarket matrix coordinate real {kind}")?;
    let stored: Vec<(usize, usize, f64)> = (0..a.n_rows())
        .flat_map(|i| a.row_iter(i).map(move |(j, v)| (i, j, v)))
        .filter(|&(i, j, _)| !sym || j <= i)
        .collect();
    writeln!(w, "{} {} {}", a.n_rows(), a.n_cols(), stored.len())?;
    for (i, j, v) in stored {
        writeln!(w, "{} {} {:e}", i + 1, j + 1, v)?;
    }
    Ok(())
}

pub fn read_vector<R: BufRead>(reader: R) -> Result<Vec<f64>> {
    let (header, body) = body_lines(reader)?;
    if !header.array {
        return Err(parse_err(1, "expected array format for a vector"));
    }
    let mut it = body.into_iter();
    let (sline, size) = it.next().ok_or_else(|| parse_err(2, "missing size line"))?;
    let mut toks = size.split_whitespace();
    let n = parse_usize(toks.next(), sline, "row count")?;
    let m = parse_usize(toks.next(), sline, "column count")?;
    if m != 1 {
        return Err(parse_err(sline, "vector must have one column"));
    }
    let mut out = Vec::with_capacity(n);
    for (line, text) in it {
        out.push(parse_f64(text.split_whitespace().next(), line)?);
    }
    if out.len() != n {
        return Err(parse_err(sline, format!("expected {n} values, found {}", out.len())));
    }
    Ok(out)
}

pub fn write_vector<W: Write>(mut w: W, v: &[f64]) -> Result<()> {
    writeln!(w, "%%MatrixMarket matrix array real general")?;
    writeln!(w, "{} 1", v.len())?;
    for x in v {
        writeln!(w, "{x:e}")?;
    }
    Ok(())
}
