//! Rolling one-step forecasts, time-series cross-validation over `(R, s)`
//! and export of interaction heatmaps.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::cp::{cp_contract_predictor, interaction_matrix, CpTensor};
use crate::error::{EvalError, FormatError};
use crate::estimator::{fit, FitConfig, Init};
use crate::model::RegressionSample;
use crate::scalar::{norm2, Scalar};
use crate::tensor::DenseTensor;

#[derive(Debug, Clone, PartialEq)]
pub struct RollingOptions {
    pub test_length: usize,
    /// `false` fits once on the initial window and keeps the coefficients
    /// frozen over the whole test window.
    pub refit: bool,
    /// Optional label for every entry of `vec(Y_t)`; errors are then also
    /// reported per label.
    pub group_labels: Option<Vec<String>>,
}

impl RollingOptions {
    pub fn new(test_length: usize) -> Self {
        Self {
            test_length,
            refit: true,
            group_labels: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForecastReport<S> {
    /// `||vec(Y_hat) - vec(Y)||_2` for each test step.
    pub per_step_errors: Vec<S>,
    pub mean_error: S,
    pub group_errors: Option<BTreeMap<String, S>>,
    pub forecasts: Vec<DenseTensor<S>>,
    /// Estimate used for the last forecast.
    pub final_estimate: CpTensor<S>,
}

fn mean<S: Scalar>(v: &[S]) -> S {
    v.iter().copied().sum::<S>() / S::lit(v.len() as f64)
}

/// Rolling one-step forecasts over the last `test_length` pairs of `sample`.
///
/// Step `i` fits on the pairs before test point `i`, forecasts
/// `<B_hat, X>` for the test point and records the error; each refit is
/// warm-started from the previous estimate. For a TAR series, embed the
/// series with [`crate::model::embed_lags`] first.
pub fn rolling_forecast<S: Scalar>(
    sample: &RegressionSample<S>,
    config: &FitConfig<S>,
    options: &RollingOptions,
) -> Result<ForecastReport<S>, EvalError> {
    let total = sample.len();
    if options.test_length == 0 || options.test_length >= total {
        return Err(EvalError::Argument(format!(
            "test length {} must lie in 1..{total}",
            options.test_length
        )));
    }
    let p_y = sample.split().response_len();
    if let Some(labels) = &options.group_labels {
        if labels.len() != p_y {
            return Err(EvalError::Argument(format!(
                "{} group labels for {p_y} response entries",
                labels.len()
            )));
        }
    }
    let train = total - options.test_length;
    let mut cfg = config.clone();
    let mut estimate: Option<CpTensor<S>> = None;
    let mut errors = Vec::with_capacity(options.test_length);
    let mut forecasts = Vec::with_capacity(options.test_length);
    let mut group_sums: BTreeMap<String, S> = BTreeMap::new();
    for step in 0..options.test_length {
        let end = train + step;
        if estimate.is_none() || options.refit {
            let window = sample.window(0..end)?;
            let res = fit(&window, &cfg).map_err(|source| EvalError::FitFailedAt { step, source })?;
            cfg.init = Init::WarmStart(res.estimate.clone());
            estimate = Some(res.estimate);
        }
        let b = estimate.as_ref().expect("fitted above");
        let (yhat, _) = cp_contract_predictor(b, sample.split(), &sample.predictors()[end])
            .map_err(|e| EvalError::Model(e.into()))?;
        let diff: Vec<S> = yhat
            .data()
            .iter()
            .zip(sample.responses()[end].data())
            .map(|(&a, &y)| a - y)
            .collect();
        errors.push(norm2(&diff));
        if let Some(labels) = &options.group_labels {
            let mut sq: BTreeMap<&str, S> = BTreeMap::new();
            for (l, &d) in labels.iter().zip(&diff) {
                *sq.entry(l.as_str()).or_insert(S::zero()) += d * d;
            }
            for (l, s) in sq {
                *group_sums.entry(l.to_string()).or_insert(S::zero()) += s.sqrt();
            }
        }
        forecasts.push(yhat);
    }
    let n = S::lit(options.test_length as f64);
    Ok(ForecastReport {
        mean_error: mean(&errors),
        per_step_errors: errors,
        group_errors: options
            .group_labels
            .as_ref()
            .map(|_| group_sums.into_iter().map(|(k, v)| (k, v / n)).collect()),
        forecasts,
        final_estimate: estimate.expect("test_length >= 1"),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct CvGrid {
    pub ranks: Vec<usize>,
    /// Candidate sparsity vectors; `None` is the non-sparse estimator.
    pub sparsity_sets: Vec<Option<Vec<usize>>>,
    pub val_length: usize,
}

impl CvGrid {
    pub fn validate(&self, sample_len: usize) -> Result<(), EvalError> {
        if self.ranks.is_empty() || self.sparsity_sets.is_empty() {
            return Err(EvalError::Argument("CV grid needs at least one rank and one sparsity set".into()));
        }
        if self.val_length == 0 || self.val_length >= sample_len {
            return Err(EvalError::Argument(format!(
                "validation length {} must lie in 1..{sample_len}",
                self.val_length
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CvCell<S> {
    pub rank: usize,
    pub sparsity: Option<Vec<usize>>,
    /// Mean validation forecast error, or the failure message.
    pub score: Result<S, String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CvOutcome<S> {
    pub best_rank: usize,
    pub best_sparsity: Option<Vec<usize>>,
    /// One row per grid cell, ranks outer and sparsity sets inner.
    pub table: Vec<CvCell<S>>,
}

/// Scores every `(R, s)` cell by the rolling forecast error over the last
/// `val_length` pairs and returns the best cell.
///
/// Scores within a relative `1e-9` of the minimum count as ties, resolved
/// by smaller `R`, then smaller `sum(s)` (non-sparse counts as the sum of all
/// dims), so the choice does not depend on grid order.
pub fn cross_validate<S: Scalar>(
    sample: &RegressionSample<S>,
    grid: &CvGrid,
    base: &FitConfig<S>,
    parallel: bool,
) -> Result<CvOutcome<S>, EvalError> {
    grid.validate(sample.len())?;
    let cells: Vec<(usize, Option<Vec<usize>>)> = grid
        .ranks
        .iter()
        .flat_map(|&r| grid.sparsity_sets.iter().map(move |s| (r, s.clone())))
        .collect();
    let options = RollingOptions::new(grid.val_length);
    let score = |(rank, sparsity): &(usize, Option<Vec<usize>>)| -> CvCell<S> {
        let mut cfg = base.clone();
        cfg.rank = *rank;
        cfg.sparsity = sparsity.clone();
        let score = rolling_forecast(sample, &cfg, &options)
            .map(|r| r.mean_error)
            .map_err(|e| e.to_string());
        CvCell {
            rank: *rank,
            sparsity: sparsity.clone(),
            score,
        }
    };
    let table: Vec<CvCell<S>> = if parallel {
        cells.par_iter().map(score).collect()
    } else {
        cells.iter().map(score).collect()
    };
    let full: usize = sample.split().dims().iter().sum();
    let best_score = table
        .iter()
        .filter_map(|c| c.score.as_ref().ok().copied())
        .filter(|s| s.is_finite())
        .fold(None, |acc: Option<S>, s| Some(acc.map_or(s, |a| a.min(s))));
    let Some(best_score) = best_score else {
        return Err(EvalError::CvFailure {
            attempted: table
                .into_iter()
                .map(|c| (c.rank, c.sparsity, c.score.err().unwrap_or_else(|| "non-finite score".into())))
                .collect(),
        });
    };
    let slack = S::lit(1e-9) * best_score.abs().max(S::lit(1e-300));
    let winner = table
        .iter()
        .filter(|c| matches!(c.score, Ok(s) if s <= best_score + slack))
        .min_by_key(|c| {
            let sum = c.sparsity.as_ref().map_or(full, |s| s.iter().sum());
            (c.rank, sum, c.sparsity.clone().unwrap_or_default())
        })
        .expect("the minimum is attained");
    Ok(CvOutcome {
        best_rank: winner.rank,
        best_sparsity: winner.sparsity.clone(),
        table,
    })
}

fn write_file(path: &Path, text: &str) -> Result<(), FormatError> {
    std::fs::write(path, text).map_err(|source| FormatError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Writes `heatmap_r{r}_d{d1}x{d2}.csv` for every `(r, d1, d2)` in `pairs`
/// and `omega.csv` into `dir`. Indices are 0-based in the API and 1-based in
/// the file names. `scale_by_weight` multiplies each matrix by `w_r`.
pub fn export_heatmaps<S: Scalar>(
    estimate: &CpTensor<S>,
    pairs: &[(usize, usize, usize)],
    dir: &Path,
    scale_by_weight: bool,
) -> Result<Vec<PathBuf>, EvalError> {
    for &(r, d1, d2) in pairs {
        if r >= estimate.rank() || d1 >= estimate.order() || d2 >= estimate.order() || d1 == d2 {
            return Err(EvalError::Argument(format!(
                "heatmap ({r}, {d1}, {d2}) is invalid for rank {} and {} modes",
                estimate.rank(),
                estimate.order()
            )));
        }
    }
    let mut written = Vec::with_capacity(pairs.len() + 1);
    for &(r, d1, d2) in pairs {
        let mut m = interaction_matrix(estimate, r, d1, d2).map_err(|e| EvalError::Argument(e.to_string()))?;
        if scale_by_weight {
            m.scale(estimate.weights()[r]);
        }
        let mut text = String::new();
        for i in 0..m.rows() {
            let row: Vec<String> = m.row(i).iter().map(|v| format!("{v:?}")).collect();
            let _ = writeln!(text, "{}", row.join(","));
        }
        let path = dir.join(format!("heatmap_r{}_d{}x{}.csv", r + 1, d1 + 1, d2 + 1));
        write_file(&path, &text)?;
        written.push(path);
    }
    let mut omega = estimate.weights().to_vec();
    omega.sort_by(|a, b| b.partial_cmp(a).unwrap_or(std::cmp::Ordering::Equal));
    let mut text = String::from("omega\n");
    for w in omega {
        let _ = writeln!(text, "{w:?}");
    }
    let path = dir.join("omega.csv");
    write_file(&path, &text)?;
    written.push(path);
    Ok(written)
}

/// `step,error` with 1-based steps.
pub fn forecast_csv<S: Scalar>(report: &ForecastReport<S>) -> String {
    let mut text = String::from("step,error\n");
    for (i, e) in report.per_step_errors.iter().enumerate() {
        let _ = writeln!(text, "{},{e:?}", i + 1);
    }
    text
}

/// `R,s,fe`; `s` is colon-separated or `none`, failed cells score `NaN`.
pub fn cv_csv<S: Scalar>(outcome: &CvOutcome<S>) -> String {
    let mut text = String::from("R,s,fe\n");
    for c in &outcome.table {
        let s = c.sparsity.as_ref().map_or_else(
            || "none".to_string(),
            |s| s.iter().map(ToString::to_string).collect::<Vec<_>>().join(":"),
        );
        match &c.score {
            Ok(v) => {
                let _ = writeln!(text, "{},{s},{v:?}", c.rank);
            }
            Err(_) => {
                let _ = writeln!(text, "{},{s},NaN", c.rank);
            }
        }
    }
    text
}

pub fn write_forecast_csv<S: Scalar>(path: &Path, report: &ForecastReport<S>) -> Result<(), FormatError> {
    write_file(path, &forecast_csv(report))
}

pub fn write_cv_csv<S: Scalar>(path: &Path, outcome: &CvOutcome<S>) -> Result<(), FormatError> {
    write_file(path, &cv_csv(outcome))
}
