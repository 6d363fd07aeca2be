use std::fmt::Write as _;
use std::path::Path;

use tcpr_core::baseline::{bench_iteration_cost, lambda_max, log_log_slope, write_bench_csv, BenchSweep};
use tcpr_core::estimator::{fit_multistart, fit_staged, random_starts, FitResult, Init};
use tcpr_core::evaluation::{
    cross_validate, export_heatmaps, rolling_forecast, write_cv_csv, write_forecast_csv, CvGrid, RollingOptions,
};
use tcpr_core::format::{read_cpt, write_cpt, write_tzt};
use tcpr_core::simulation::{simulate, DgpConfig, DgpKind};
use tcpr_core::{tar_stationarity, Cp, FitConfig, Sample, TarSpec};

use crate::args::{
    BenchArgs, CvArgs, Dgp, EstimatorArgs, FitArgs, ForecastArgs, HeatmapArgs, InitKind, SimulateArgs,
    StationarityArgs,
};
use crate::data::{ensure_dir, load_sample, series_name};
use crate::error::CliError;
use crate::manifest::RunManifest;

fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text).map_err(|e| CliError::io(path, e))
}

fn join<T: ToString>(v: &[T], sep: &str) -> String {
    v.iter().map(ToString::to_string).collect::<Vec<_>>().join(sep)
}

pub fn simulate_cmd(a: &SimulateArgs) -> Result<(), CliError> {
    let kind = match a.dgp {
        Dgp::Regression => DgpKind::RegressionAr1,
        Dgp::Tar1 => DgpKind::Tar1,
    };
    let mut cfg = DgpConfig::new(kind, a.p, a.rank, a.t, a.seed.seed);
    cfg.sparsity = a.s0;
    cfg.target_radius = a.radius;
    cfg.burn_in = a.burn_in;
    cfg.response_order = a.modes;
    let data = simulate::<f64>(&cfg)?;
    let sample = if a.noiseless { data.noiseless_sample() } else { data.sample.clone() };

    ensure_dir(&a.out)?;
    let mut manifest = RunManifest::new("simulate", a.seed.seed);
    manifest
        .set("dgp", kind)
        .set("p", a.p)
        .set("rank", a.rank)
        .set("s0", a.s0.map_or("none".into(), |s| s.to_string()))
        .set("t", a.t)
        .set("radius", format!("{:?}", a.radius))
        .set("burn_in", a.burn_in)
        .set("modes", a.modes)
        .set("noiseless", a.noiseless);
    let with_x = a.noiseless || kind == DgpKind::RegressionAr1;
    for (i, y) in sample.responses().iter().enumerate() {
        let name = series_name('Y', i + 1);
        write_tzt(&a.out.join(&name), y)?;
        manifest.artifacts.push(name);
    }
    if with_x {
        for (i, x) in sample.predictors().iter().enumerate() {
            let name = series_name('X', i + 1);
            write_tzt(&a.out.join(&name), x)?;
            manifest.artifacts.push(name);
        }
    }
    write_cpt(&a.out.join("truth.cpt"), &data.coefficients)?;
    manifest.artifacts.push("truth.cpt".into());
    manifest.write(&a.out)?;
    println!(
        "wrote {} responses{} and truth.cpt (||B||_F = {:.6}) to {}",
        sample.len(),
        if with_x { " with predictors" } else { "" },
        data.coefficients.frobenius_norm(),
        a.out.display()
    );
    Ok(())
}

fn primary_init(est: &EstimatorArgs, sample: &Sample) -> Init<f64> {
    match est.init {
        InitKind::Random => Init::Random { seed: est.seed.seed },
        InitKind::Lasso => Init::Lasso {
            lambda: est.lasso_frac * lambda_max(sample),
            ista_iters: est.ista_iters,
        },
        InitKind::Ridge => Init::Ridge {
            penalty: est.ridge,
            restarts: 3,
        },
    }
}

fn base_config(est: &EstimatorArgs, rank: usize, sparsity: Option<Vec<usize>>, sample: &Sample) -> FitConfig {
    let mut cfg = FitConfig::new(rank)
        .with_rel_tol(est.tol)
        .with_max_iters(est.max_iters)
        .with_init(primary_init(est, sample));
    cfg.sparsity = sparsity;
    cfg
}

fn record_estimator(m: &mut RunManifest, est: &EstimatorArgs) {
    m.set("m", est.m)
        .set("init", format!("{:?}", est.init).to_lowercase())
        .set("restarts", est.restarts)
        .set("lasso_frac", format!("{:?}", est.lasso_frac))
        .set("ista_iters", est.ista_iters)
        .set("ridge", format!("{:?}", est.ridge))
        .set("tol", format!("{:?}", est.tol))
        .set("max_iters", est.max_iters);
}

fn sparsity_text(s: &Option<Vec<usize>>) -> String {
    s.as_ref().map_or("none".into(), |v| join(v, ","))
}

fn check_sparsity(s: &Option<Vec<usize>>, sample: &Sample) -> Result<(), CliError> {
    if let Some(s) = s {
        let order = sample.split().order();
        if s.len() != order {
            return Err(CliError::Usage(format!(
                "--sparsity has {} entries but the data have {order} modes",
                s.len()
            )));
        }
    }
    Ok(())
}

fn loss_trace_csv(res: &FitResult<f64>) -> String {
    let mut text = String::from("iteration,loss\n");
    for (i, l) in res.loss_trace.iter().enumerate() {
        let _ = writeln!(text, "{i},{l:?}");
    }
    text
}

pub fn fit_cmd(a: &FitArgs) -> Result<(), CliError> {
    let sample = load_sample(&a.est.data, a.est.m)?;
    check_sparsity(&a.sparsity, &sample)?;
    let cfg = base_config(&a.est, a.rank, a.sparsity.clone(), &sample);
    let mut starts = vec![cfg.init.clone()];
    starts.extend(random_starts(a.est.seed.seed + 1, a.est.restarts));
    // Sparse fits truncate converged non-sparse fits rather than random starts.
    let res = if cfg.sparsity.is_some() {
        fit_staged(&sample, &cfg, &starts)?.sparse
    } else {
        fit_multistart(&sample, &cfg, &starts)?
    };

    ensure_dir(&a.out)?;
    let est_path = a.out.join("estimate.cpt");
    write_cpt(&est_path, &res.estimate)?;
    write_text(&a.out.join("loss_trace.csv"), &loss_trace_csv(&res))?;
    let mut manifest = RunManifest::new("fit", a.est.seed.seed);
    record_estimator(&mut manifest, &a.est);
    manifest
        .set("rank", a.rank)
        .set("sparsity", sparsity_text(&a.sparsity))
        .set("pairs", sample.len());
    manifest.artifacts = vec!["estimate.cpt".into(), "loss_trace.csv".into()];
    manifest.write(&a.out)?;
    println!(
        "final_loss={:?} iterations={} stop={:?}",
        res.final_loss(),
        res.iterations,
        res.stop_reason
    );
    if !res.converged {
        return Err(CliError::NotConverged {
            iterations: res.iterations,
            written: est_path,
        });
    }
    Ok(())
}

fn read_labels(path: &Path) -> Result<Vec<String>, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    Ok(text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .map(String::from)
        .collect())
}

pub fn forecast_cmd(a: &ForecastArgs) -> Result<(), CliError> {
    let sample = load_sample(&a.est.data, a.est.m)?;
    check_sparsity(&a.sparsity, &sample)?;
    let cfg = base_config(&a.est, a.rank, a.sparsity.clone(), &sample);
    let mut options = RollingOptions::new(a.test_length);
    options.refit = !a.no_refit;
    if let Some(g) = &a.groups {
        options.group_labels = Some(read_labels(g)?);
    }
    let report = rolling_forecast(&sample, &cfg, &options)?;

    ensure_dir(&a.out)?;
    write_forecast_csv(&a.out.join("forecast.csv"), &report)?;
    let mut manifest = RunManifest::new("forecast", a.est.seed.seed);
    record_estimator(&mut manifest, &a.est);
    manifest
        .set("rank", a.rank)
        .set("sparsity", sparsity_text(&a.sparsity))
        .set("test_length", a.test_length)
        .set("refit", !a.no_refit);
    manifest.artifacts.push("forecast.csv".into());
    if let Some(groups) = &report.group_errors {
        let mut text = String::from("group,error\n");
        for (g, e) in groups {
            let _ = writeln!(text, "{g},{e:?}");
        }
        write_text(&a.out.join("group_errors.csv"), &text)?;
        manifest.artifacts.push("group_errors.csv".into());
    }
    manifest.write(&a.out)?;
    println!("mean_error={:?}", report.mean_error);
    Ok(())
}

fn parse_sparsity_sets(text: &str) -> Result<Vec<Option<Vec<usize>>>, CliError> {
    text.split(';')
        .map(|part| {
            let part = part.trim();
            if part.eq_ignore_ascii_case("none") {
                return Ok(None);
            }
            part.split(',')
                .map(|s| s.trim().parse::<usize>())
                .collect::<Result<Vec<_>, _>>()
                .map(Some)
                .map_err(|_| CliError::Usage(format!("invalid sparsity set `{part}`")))
        })
        .collect()
}

pub fn cv_cmd(a: &CvArgs) -> Result<(), CliError> {
    let sample = load_sample(&a.est.data, a.est.m)?;
    let sets = parse_sparsity_sets(&a.sparsity_sets)?;
    for s in &sets {
        check_sparsity(s, &sample)?;
    }
    let grid = CvGrid {
        ranks: a.ranks.clone(),
        sparsity_sets: sets,
        val_length: a.val_length,
    };
    let base = base_config(&a.est, a.ranks.first().copied().unwrap_or(1), None, &sample);
    let outcome = if a.jobs > 1 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(a.jobs)
            .build()
            .map_err(|e| CliError::Usage(format!("cannot start {} workers: {e}", a.jobs)))?;
        pool.install(|| cross_validate(&sample, &grid, &base, true))?
    } else {
        cross_validate(&sample, &grid, &base, false)?
    };

    ensure_dir(&a.out)?;
    write_cv_csv(&a.out.join("cv.csv"), &outcome)?;
    let mut manifest = RunManifest::new("cv", a.est.seed.seed);
    record_estimator(&mut manifest, &a.est);
    manifest
        .set("ranks", join(&a.ranks, ","))
        .set("sparsity_sets", a.sparsity_sets.trim())
        .set("val_length", a.val_length);
    manifest.artifacts.push("cv.csv".into());
    manifest.write(&a.out)?;
    println!(
        "best_rank={} best_sparsity={}",
        outcome.best_rank,
        sparsity_text(&outcome.best_sparsity)
    );
    Ok(())
}

fn tar_spec_for(c: &Cp, lags: usize) -> Result<TarSpec, CliError> {
    if lags == 0 {
        return Err(CliError::Usage("--lags must be at least 1".into()));
    }
    let extra = usize::from(lags > 1);
    let order = c.order();
    if order < 2 + extra || (order - extra) % 2 != 0 {
        return Err(CliError::Usage(format!(
            "a TAR({lags}) coefficient needs {} modes, found {order}",
            if extra == 1 { "2m + 1" } else { "2m" }
        )));
    }
    let m = (order - extra) / 2;
    let dims = c.dims();
    if dims[..m] != dims[m..2 * m] || (extra == 1 && dims[2 * m] != lags) {
        return Err(CliError::Usage(format!("dims {dims:?} do not describe a TAR({lags}) coefficient")));
    }
    Ok(TarSpec::new(dims[..m].to_vec(), lags)?)
}

pub fn stationarity_cmd(a: &StationarityArgs) -> Result<(), CliError> {
    let c: Cp = read_cpt(&a.coef)?;
    let spec = tar_spec_for(&c, a.lags)?;
    let tol = a.tol;
    if !(tol > 0.0) {
        return Err(CliError::Usage("--tol must be positive".into()));
    }
    let report = tar_stationarity(&c, &spec, tol)?;
    println!(
        "spectral_radius={:.6} stationary={}",
        report.spectral_radius, report.is_stationary
    );
    if let Some(out) = &a.out {
        ensure_dir(out)?;
        write_text(
            &out.join("stationarity.csv"),
            &format!(
                "spectral_radius,stationary\n{:?},{}\n",
                report.spectral_radius, report.is_stationary
            ),
        )?;
        let mut manifest = RunManifest::new("stationarity", a.seed.seed);
        manifest.set("lags", a.lags).set("tol", format!("{tol:?}"));
        manifest.artifacts.push("stationarity.csv".into());
        manifest.write(out)?;
    }
    Ok(())
}

fn parse_pair(text: &str) -> Result<(usize, usize, usize), CliError> {
    let bad = || CliError::Usage(format!("invalid heatmap pair `{text}` (expected r:d1xd2, 1-based)"));
    let (r, modes) = text.trim().split_once(':').ok_or_else(bad)?;
    let (d1, d2) = modes.split_once('x').ok_or_else(bad)?;
    let one_based = |s: &str| s.trim().parse::<usize>().ok().filter(|&v| v >= 1).map(|v| v - 1);
    Ok((
        one_based(r).ok_or_else(bad)?,
        one_based(d1).ok_or_else(bad)?,
        one_based(d2).ok_or_else(bad)?,
    ))
}

pub fn heatmap_cmd(a: &HeatmapArgs) -> Result<(), CliError> {
    let c: Cp = read_cpt(&a.coef)?;
    let pairs = a.pairs.iter().map(|p| parse_pair(p)).collect::<Result<Vec<_>, _>>()?;
    ensure_dir(&a.out)?;
    let written = export_heatmaps(&c, &pairs, &a.out, a.scale)?;
    let mut manifest = RunManifest::new("heatmap", a.seed.seed);
    manifest.set("pairs", a.pairs.join(",")).set("scale", a.scale);
    manifest.artifacts = written
        .iter()
        .filter_map(|p| p.file_name().and_then(|n| n.to_str()).map(String::from))
        .collect();
    manifest.write(&a.out)?;
    println!("wrote {} files to {}", written.len(), a.out.display());
    Ok(())
}

pub fn bench_cmd(a: &BenchArgs) -> Result<(), CliError> {
    if a.ps.is_empty() || a.ps.contains(&0) {
        return Err(CliError::Usage("--ps needs positive mode sizes".into()));
    }
    let mut sweep = BenchSweep::new(a.ps.clone(), a.rank, a.t);
    sweep.iterations = a.iterations;
    sweep.s0 = a.s0;
    sweep.seed = a.seed.seed;
    let rows = bench_iteration_cost(&sweep)?;

    ensure_dir(&a.out)?;
    write_bench_csv(&a.out.join("bench.csv"), &rows)?;
    let mut manifest = RunManifest::new("bench", a.seed.seed);
    manifest
        .set("ps", join(&a.ps, ","))
        .set("rank", a.rank)
        .set("t", a.t)
        .set("iterations", a.iterations)
        .set("s0", a.s0.map_or("none".into(), |s| s.to_string()));
    manifest.artifacts.push("bench.csv".into());
    manifest.write(&a.out)?;
    let slope = |m| log_log_slope(&rows, m).map_or("n/a".to_string(), |s| format!("{s:.3}"));
    println!("slope_ista={} slope_cp_als={}", slope("ista"), slope("cp_als"));
    Ok(())
}
