//! Per-iteration cost of ISTA against the alternating fitter on matched
//! TAR(1) instances.

use std::fmt::Write as _;
use std::path::Path;
use std::time::Instant;

use super::{lambda_max, IstaSolver, LassoConfig};
use crate::error::{BenchError, FormatError};
use crate::estimator::{AlternatingFitter, FitConfig};
use crate::simulation::{simulate, DgpConfig, DgpKind};

#[derive(Debug, Clone, PartialEq)]
pub struct BenchSweep {
    pub ps: Vec<usize>,
    pub rank: usize,
    pub t: usize,
    /// Timed iterations per method and `p` (after one untimed warm-up).
    pub iterations: usize,
    /// Sparsity of the simulated loadings and of the fitted estimator.
    pub s0: Option<usize>,
    pub seed: u64,
}

impl BenchSweep {
    pub fn new(ps: Vec<usize>, rank: usize, t: usize) -> Self {
        Self {
            ps,
            rank,
            t,
            iterations: 5,
            s0: None,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchRow {
    /// `ista` or `cp_als`.
    pub method: &'static str,
    pub p: usize,
    pub rank: usize,
    pub t: usize,
    pub mean_iter_micros: f64,
}

fn time_mean(iterations: usize, mut f: impl FnMut() -> Result<(), BenchError>) -> Result<f64, BenchError> {
    f()?;
    let start = Instant::now();
    for _ in 0..iterations {
        f()?;
    }
    Ok(start.elapsed().as_secs_f64() * 1e6 / iterations.max(1) as f64)
}

/// Times ISTA steps (penalty `0.1 lambda_max`) and full outer iterations of
/// the alternating fitter on one TAR(1) sample per `p`.
pub fn bench_iteration_cost(sweep: &BenchSweep) -> Result<Vec<BenchRow>, BenchError> {
    let mut rows = Vec::with_capacity(2 * sweep.ps.len());
    for &p in &sweep.ps {
        let mut cfg = DgpConfig::new(DgpKind::Tar1, p, sweep.rank, sweep.t, sweep.seed);
        cfg.sparsity = sweep.s0.map(|s| s.min(p));
        let data = simulate::<f64>(&cfg)?;
        let sample = &data.sample;

        let lasso = LassoConfig::new(0.1 * lambda_max(sample));
        let mut ista = IstaSolver::new(sample, &lasso)?;
        let ista_micros = time_mean(sweep.iterations, || {
            ista.step();
            Ok(())
        })?;

        let mut fit_cfg = FitConfig::new(sweep.rank);
        if let Some(s) = cfg.sparsity {
            fit_cfg = fit_cfg.with_sparsity(vec![s; cfg.split().order()]);
        }
        let mut fitter = AlternatingFitter::new(sample, &fit_cfg)?;
        let als_micros = time_mean(sweep.iterations, || {
            fitter.iterate()?;
            Ok(())
        })?;

        rows.push(BenchRow {
            method: "ista",
            p,
            rank: sweep.rank,
            t: sweep.t,
            mean_iter_micros: ista_micros,
        });
        rows.push(BenchRow {
            method: "cp_als",
            p,
            rank: sweep.rank,
            t: sweep.t,
            mean_iter_micros: als_micros,
        });
    }
    Ok(rows)
}

pub fn bench_csv(rows: &[BenchRow]) -> String {
    let mut text = String::from("method,p,R,T,mean_iter_micros\n");
    for r in rows {
        let _ = writeln!(text, "{},{},{},{},{:.3}", r.method, r.p, r.rank, r.t, r.mean_iter_micros);
    }
    text
}

pub fn write_bench_csv(path: &Path, rows: &[BenchRow]) -> Result<(), FormatError> {
    std::fs::write(path, bench_csv(rows)).map_err(|source| FormatError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Least-squares slope of `ln(micros)` against `ln(p)` for one method.
pub fn log_log_slope(rows: &[BenchRow], method: &str) -> Option<f64> {
    let pts: Vec<(f64, f64)> = rows
        .iter()
        .filter(|r| r.method == method && r.mean_iter_micros > 0.0)
        .map(|r| ((r.p as f64).ln(), r.mean_iter_micros.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}
