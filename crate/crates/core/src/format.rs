//! Plain-text tensor formats.
//!
//! `.tzt`: `tzt 1`, a line of space-separated dims, then one value per line
//! in canonical (first index fastest) order.
//!
//! `.cpt`: `cpt 1`, dims, rank, the weights on one line, then for every mode
//! its `p_d x R` factor matrix, one row per line.
//!
//! Values are written with Rust's shortest round-trip formatting, so reading
//! back a written file reproduces every bit.

use std::fmt::Write as _;
use std::path::Path;

use crate::cp::CpTensor;
use crate::error::FormatError;
use crate::matrix::Matrix;
use crate::scalar::Scalar;
use crate::tensor::DenseTensor;

pub fn tzt_to_string<S: Scalar>(t: &DenseTensor<S>) -> String {
    let mut out = String::from("tzt 1\n");
    out.push_str(&join(t.dims()));
    out.push('\n');
    for v in t.data() {
        let _ = writeln!(out, "{v:?}");
    }
    out
}

pub fn cpt_to_string<S: Scalar>(c: &CpTensor<S>) -> String {
    let mut out = String::from("cpt 1\n");
    out.push_str(&join(c.dims()));
    out.push('\n');
    let _ = writeln!(out, "{}", c.rank());
    out.push_str(&join_values(c.weights()));
    out.push('\n');
    for f in c.factors() {
        for i in 0..f.rows() {
            out.push_str(&join_values(&f.row(i)));
            out.push('\n');
        }
    }
    out
}

fn join(dims: &[usize]) -> String {
    dims.iter().map(ToString::to_string).collect::<Vec<_>>().join(" ")
}

fn join_values<S: Scalar>(v: &[S]) -> String {
    v.iter().map(|x| format!("{x:?}")).collect::<Vec<_>>().join(" ")
}

struct Lines<'a> {
    path: &'a Path,
    inner: std::iter::Enumerate<std::str::Lines<'a>>,
    line: usize,
}

impl<'a> Lines<'a> {
    fn new(path: &'a Path, text: &'a str) -> Self {
        Self {
            path,
            inner: text.lines().enumerate(),
            line: 0,
        }
    }

    fn err(&self, message: impl Into<String>) -> FormatError {
        FormatError::Parse {
            path: self.path.to_path_buf(),
            line: self.line,
            message: message.into(),
        }
    }

    fn next(&mut self, what: &str) -> Result<&'a str, FormatError> {
        match self.inner.next() {
            Some((i, l)) => {
                self.line = i + 1;
                Ok(l.trim())
            }
            None => {
                self.line += 1;
                Err(self.err(format!("unexpected end of file, expected {what}")))
            }
        }
    }

    fn header(&mut self, magic: &str) -> Result<(), FormatError> {
        let l = self.next("header")?;
        if l != format!("{magic} 1") {
            return Err(self.err(format!("expected header `{magic} 1`, found `{l}`")));
        }
        Ok(())
    }

    fn usizes(&mut self, what: &str) -> Result<Vec<usize>, FormatError> {
        let l = self.next(what)?;
        let v = l
            .split_whitespace()
            .map(|s| s.parse::<usize>().ok().filter(|&d| d > 0))
            .collect::<Option<Vec<_>>>()
            .ok_or_else(|| self.err(format!("invalid {what}: `{l}`")))?;
        if v.is_empty() {
            return Err(self.err(format!("empty {what}")));
        }
        Ok(v)
    }

    fn values<S: Scalar>(&mut self, count: usize, what: &str) -> Result<Vec<S>, FormatError> {
        let l = self.next(what)?;
        let v = l
            .split_whitespace()
            .map(|s| s.parse::<S>().ok().filter(|x| x.is_finite()))
            .collect::<Option<Vec<_>>>()
            .ok_or_else(|| self.err(format!("invalid {what}: `{l}`")))?;
        if v.len() != count {
            return Err(self.err(format!("{what} has {} values, expected {count}", v.len())));
        }
        Ok(v)
    }

    fn finish(&mut self) -> Result<(), FormatError> {
        for (i, l) in self.inner.by_ref() {
            if !l.trim().is_empty() {
                self.line = i + 1;
                return Err(self.err("trailing content"));
            }
        }
        Ok(())
    }
}

pub fn parse_tzt<S: Scalar>(path: &Path, text: &str) -> Result<DenseTensor<S>, FormatError> {
    let mut lines = Lines::new(path, text);
    lines.header("tzt")?;
    let dims = lines.usizes("dims")?;
    let len: usize = dims.iter().product();
    let mut data = Vec::with_capacity(len);
    for _ in 0..len {
        data.push(lines.values::<S>(1, "value")?[0]);
    }
    lines.finish()?;
    Ok(DenseTensor::new(dims, data)?)
}

/// Parses a `.cpt` file. Loadings that are not unit-norm are normalized with
/// their norms absorbed into the weights.
pub fn parse_cpt<S: Scalar>(path: &Path, text: &str) -> Result<CpTensor<S>, FormatError> {
    let mut lines = Lines::new(path, text);
    lines.header("cpt")?;
    let dims = lines.usizes("dims")?;
    let rank = lines.usizes("rank")?;
    if rank.len() != 1 {
        return Err(lines.err("rank line must hold a single integer"));
    }
    let rank = rank[0];
    let weights = lines.values::<S>(rank, "weights")?;
    let mut factors = Vec::with_capacity(dims.len());
    for &p in &dims {
        let rows = (0..p)
            .map(|_| lines.values::<S>(rank, "factor row"))
            .collect::<Result<Vec<_>, _>>()?;
        factors.push(Matrix::from_rows(&rows)?);
    }
    lines.finish()?;
    match CpTensor::new(weights.clone(), factors.clone()) {
        Ok(c) => Ok(c),
        Err(_) => Ok(CpTensor::from_loadings(weights, factors)?),
    }
}

fn read(path: &Path) -> Result<String, FormatError> {
    std::fs::read_to_string(path).map_err(|source| FormatError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn write(path: &Path, text: &str) -> Result<(), FormatError> {
    std::fs::write(path, text).map_err(|source| FormatError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn read_tzt<S: Scalar>(path: &Path) -> Result<DenseTensor<S>, FormatError> {
    parse_tzt(path, &read(path)?)
}

pub fn write_tzt<S: Scalar>(path: &Path, t: &DenseTensor<S>) -> Result<(), FormatError> {
    write(path, &tzt_to_string(t))
}

pub fn read_cpt<S: Scalar>(path: &Path) -> Result<CpTensor<S>, FormatError> {
    parse_cpt(path, &read(path)?)
}

pub fn write_cpt<S: Scalar>(path: &Path, c: &CpTensor<S>) -> Result<(), FormatError> {
    write(path, &cpt_to_string(c))
}
