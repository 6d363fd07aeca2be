//! Data directories: `Y_####.tzt` responses and optional `X_####.tzt`
//! predictors, ordered by their numeric index.

use std::path::{Path, PathBuf};

use tcpr_core::format::read_tzt;
use tcpr_core::model::{embed_lags, TarSpec};
use tcpr_core::{ModeSplit, Sample, Tensor};

use crate::error::CliError;

pub fn series_name(prefix: char, index: usize) -> String {
    format!("{prefix}_{index:04}.tzt")
}

fn indexed_files(dir: &Path, prefix: char) -> Result<Vec<PathBuf>, CliError> {
    let entries = std::fs::read_dir(dir).map_err(|e| CliError::io(dir, e))?;
    let mut files = Vec::new();
    for entry in entries {
        let entry = entry.map_err(|e| CliError::io(dir, e))?;
        let name = entry.file_name();
        let Some(name) = name.to_str() else { continue };
        let Some(stem) = name.strip_prefix(prefix).and_then(|s| s.strip_prefix('_')) else {
            continue;
        };
        let Some(digits) = stem.strip_suffix(".tzt") else { continue };
        if let Ok(i) = digits.parse::<usize>() {
            files.push((i, entry.path()));
        }
    }
    files.sort();
    Ok(files.into_iter().map(|(_, p)| p).collect())
}

fn read_all(files: &[PathBuf], order: usize, what: &str) -> Result<Vec<Tensor>, CliError> {
    let mut out: Vec<Tensor> = Vec::with_capacity(files.len());
    for path in files {
        let t: Tensor = read_tzt(path)?;
        if t.order() != order {
            return Err(CliError::BadInput {
                path: path.clone(),
                message: format!("{what} has {} modes, expected {order}", t.order()),
            });
        }
        if let Some(first) = out.first() {
            if first.dims() != t.dims() {
                return Err(CliError::BadInput {
                    path: path.clone(),
                    message: format!("dims {:?} differ from {:?} in {}", t.dims(), first.dims(), files[0].display()),
                });
            }
        }
        out.push(t);
    }
    Ok(out)
}

/// Loads a data directory. With predictor files the pairs are taken as is
/// (`X_i` predicts `Y_i`); without them the responses form a TAR(1) series
/// and `Y_{i-1}` predicts `Y_i`.
pub fn load_sample(dir: &Path, m: usize) -> Result<Sample, CliError> {
    if m == 0 {
        return Err(CliError::Usage("--m must be at least 1".into()));
    }
    let y_files = indexed_files(dir, 'Y')?;
    if y_files.is_empty() {
        return Err(CliError::BadInput {
            path: dir.to_path_buf(),
            message: "no Y_####.tzt files".into(),
        });
    }
    let ys = read_all(&y_files, m, "response")?;
    let x_files = indexed_files(dir, 'X')?;
    if x_files.is_empty() {
        let spec = TarSpec::new(ys[0].dims().to_vec(), 1)?;
        return Ok(embed_lags(&ys, &spec)?);
    }
    if x_files.len() != y_files.len() {
        return Err(CliError::BadInput {
            path: dir.to_path_buf(),
            message: format!("{} response files but {} predictor files", y_files.len(), x_files.len()),
        });
    }
    let first: Tensor = read_tzt(&x_files[0])?;
    let xs = read_all(&x_files, first.order(), "predictor")?;
    let split = ModeSplit::new(ys[0].dims().to_vec(), xs[0].dims().to_vec())?;
    Ok(Sample::new(split, ys, xs)?)
}

pub fn ensure_dir(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}
