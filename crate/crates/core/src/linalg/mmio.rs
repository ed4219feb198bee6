//! MatrixMarket exchange format: `coordinate real {general,symmetric}` for
//! matrices and `array real general` for vectors.

use std::io::{BufRead, Write};

use super::CsrMatrix;
use crate::{Error, Result};

/// Writes `a`. With `symmetric`, only the lower triangle is stored.
pub fn write_matrix<W: Write>(mut w: W, a: &CsrMatrix, symmetric: bool) -> Result<()> {
    let kind = if symmetric { "symmetric" } else { "general" };
    writeln!(w, "%%MatrixMarket matrix coordinate real {kind}")?;
    let mut entries = Vec::with_capacity(a.nnz());
    for i in 0..a.nrows() {
        let (cols, vals) = a.row(i);
        for (&j, &v) in cols.iter().zip(vals) {
            if !symmetric || j <= i {
                entries.push((i, j, v));
            }
        }
    }
    writeln!(w, "{} {} {}", a.nrows(), a.ncols(), entries.len())?;
    for (i, j, v) in entries {
        writeln!(w, "{} {} {:.17e}", i + 1, j + 1, v)?;
    }
    Ok(())
}

fn header_and_body<R: BufRead>(r: R) -> Result<(String, Vec<String>)> {
    let mut lines = r.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::Parse("empty MatrixMarket input".into()))??;
    let mut body = Vec::new();
    for line in lines {
        let line = line?;
        let t = line.trim();
        if t.is_empty() || t.starts_with('%') {
            continue;
        }
        body.push(t.to_string());
    }
    Ok((header.to_lowercase(), body))
}

fn parse<T: std::str::FromStr>(tok: Option<&str>, what: &str) -> Result<T> {
    tok.ok_or_else(|| Error::Parse(format!("missing {what}")))?
        .parse()
        .map_err(|_| Error::Parse(format!("bad {what}")))
}

pub fn read_matrix<R: BufRead>(r: R) -> Result<CsrMatrix> {
    let (header, body) = header_and_body(r)?;
    let fields: Vec<&str> = header.split_whitespace().collect();
    if fields.len() < 5 || fields[0] != "%%matrixmarket" || fields[1] != "matrix" {
        return Err(Error::Parse(format!("unsupported header `{header}`")));
    }
    if fields[2] != "coordinate" || fields[3] != "real" {
        return Err(Error::Parse("only coordinate real matrices are supported".into()));
    }
    let symmetric = match fields[4] {
        "general" => false,
        "symmetric" => true,
        other => return Err(Error::Parse(format!("unsupported symmetry `{other}`"))),
    };
    let mut it = body.iter();
    let size = it.next().ok_or_else(|| Error::Parse("missing size line".into()))?;
    let mut toks = size.split_whitespace();
    let nrows: usize = parse(toks.next(), "row count")?;
    let ncols: usize = parse(toks.next(), "column count")?;
    let nnz: usize = parse(toks.next(), "entry count")?;
    let mut triplets = Vec::with_capacity(if symmetric { 2 * nnz } else { nnz });
    for line in it {
        let mut toks = line.split_whitespace();
        let i: usize = parse(toks.next(), "row index")?;
        let j: usize = parse(toks.next(), "column index")?;
        let v: f64 = parse(toks.next(), "value")?;
        if i == 0 || j == 0 || i > nrows || j > ncols {
            return Err(Error::Parse(format!("entry ({i},{j}) out of range")));
        }
        triplets.push((i - 1, j - 1, v));
        if symmetric && i != j {
            triplets.push((j - 1, i - 1, v));
        }
    }
    let expected = if symmetric {
        triplets.iter().filter(|t| t.0 >= t.1).count()
    } else {
        triplets.len()
    };
    if expected != nnz {
        return Err(Error::Parse(format!("expected {nnz} entries, found {expected}")));
    }
    let a = CsrMatrix::from_triplets(nrows, ncols, &triplets);
    Ok(if symmetric { a.assert_symmetric() } else { a })
}

pub fn write_vector<W: Write>(mut w: W, x: &[f64]) -> Result<()> {
    writeln!(w, "%%MatrixMarket matrix array real general")?;
    writeln!(w, "{} 1", x.len())?;
    for v in x {
        writeln!(w, "{v:.17e}")?;
    }
    Ok(())
}

pub fn read_vector<R: BufRead>(r: R) -> Result<Vec<f64>> {
    let (header, body) = header_and_body(r)?;
    if !header.starts_with("%%matrixmarket matrix array real") {
        return Err(Error::Parse(format!("unsupported header `{header}`")));
    }
    let mut it = body.iter();
    let size = it.next().ok_or_else(|| Error::Parse("missing size line".into()))?;
    let mut toks = size.split_whitespace();
    let n: usize = parse(toks.next(), "row count")?;
    let m: usize = parse(toks.next(), "column count")?;
    if m != 1 {
        return Err(Error::Parse("vector must have one column".into()));
    }
    let x: Vec<f64> = it
        .map(|l| parse(Some(l.as_str()), "value"))
        .collect::<Result<_>>()?;
    if x.len() != n {
        return Err(Error::Parse(format!("expected {n} values, found {}", x.len())));
    }
    Ok(x)
}
