mod common;

use common::*;
use tcpr_core::estimator::{fit, predict, FitConfig, Init};
use tcpr_core::evaluation::{
    cross_validate, cv_csv, export_heatmaps, forecast_csv, rolling_forecast, CvGrid, RollingOptions,
};
use tcpr_core::simulation::{simulate, DgpConfig, DgpKind};
use tcpr_core::{interaction_matrix, CpTensor, EvalError, Matrix, ModeSplit, RegressionSample};

fn ridge(rank: usize) -> FitConfig<f64> {
    FitConfig::new(rank)
        .with_init(Init::Ridge {
            penalty: 1e-6,
            restarts: 3,
        })
        .with_rel_tol(1e-12)
        .with_max_iters(2000)
}

fn noiseless_matrix_model(seed: u64, rank: usize, t: usize) -> (RegressionSample<f64>, CpTensor<f64>) {
    let mut cfg = DgpConfig::new(DgpKind::RegressionAr1, 3, rank, t, seed);
    cfg.response_order = 1;
    let data = simulate::<f64>(&cfg).unwrap();
    (data.noiseless_sample(), data.coefficients)
}

#[test]
fn oracle_warm_start_forecasts_noiseless_data_exactly() {
    let data = simulate::<f64>(&DgpConfig::new(DgpKind::RegressionAr1, 2, 2, 60, 3)).unwrap();
    let sample = data.noiseless_sample();
    let cfg = FitConfig::new(2).with_init(Init::WarmStart(data.coefficients.clone()));
    let report = rolling_forecast(&sample, &cfg, &RollingOptions::new(10)).unwrap();
    assert_eq!(report.per_step_errors.len(), 10);
    assert_eq!(report.forecasts.len(), 10);
    assert!(report.per_step_errors.iter().all(|&e| e < 1e-6), "{:?}", report.per_step_errors);
}

#[test]
fn pure_noise_error_matches_expected_noise_norm() {
    let mut g = rng(21);
    let split = ModeSplit::new(vec![4], vec![4]).unwrap();
    let mut truth = rand_cp(&mut g, &split.dims(), 1);
    truth.scale_weights(0.0);
    let sample = planted_sample(&mut g, &split, &truth, 550, 1.0);
    let report = rolling_forecast(&sample, &ridge(1), &RollingOptions::new(50)).unwrap();
    // E||z|| for z ~ N(0, I_4) is sqrt(2) Gamma(5/2) / Gamma(2)
    let expected = 2f64.sqrt() * 0.75 * std::f64::consts::PI.sqrt();
    assert!(
        (report.mean_error - expected).abs() < 0.1 * expected,
        "{} vs {expected}",
        report.mean_error
    );
}

#[test]
fn frozen_coefficients_match_batch_prediction() {
    let mut g = rng(22);
    let split = ModeSplit::new(vec![2, 2], vec![3]).unwrap();
    let truth = rand_cp(&mut g, &split.dims(), 2);
    let sample = planted_sample(&mut g, &split, &truth, 80, 0.3);
    let opts = RollingOptions {
        refit: false,
        ..RollingOptions::new(20)
    };
    let report = rolling_forecast(&sample, &ridge(2), &opts).unwrap();
    let test = sample.window(60..80).unwrap();
    let batch = predict(&report.final_estimate, &test).unwrap();
    for (a, b) in report.forecasts.iter().zip(&batch) {
        assert!(max_abs_diff(a.data(), b.data()) < 1e-12);
    }
    let direct = fit(&sample.window(0..60).unwrap(), &ridge(2)).unwrap();
    assert_eq!(direct.estimate, report.final_estimate);
}

#[test]
fn warm_refits_agree_with_cold_refits() {
    let mut g = rng(23);
    let split = ModeSplit::new(vec![3], vec![3]).unwrap();
    let truth = rand_cp(&mut g, &split.dims(), 1);
    let sample = planted_sample(&mut g, &split, &truth, 120, 0.5);
    let report = rolling_forecast(&sample, &ridge(1), &RollingOptions::new(5)).unwrap();
    for step in 0..5 {
        let end = 115 + step;
        let cold = fit(&sample.window(0..end).unwrap(), &ridge(1)).unwrap();
        let yhat = predict(&cold.estimate, &sample.window(end..end + 1).unwrap()).unwrap();
        assert!(max_abs_diff(yhat[0].data(), report.forecasts[step].data()) < 1e-4);
    }
}

#[test]
fn group_errors_split_the_response_entries() {
    let mut g = rng(24);
    let split = ModeSplit::new(vec![4], vec![2]).unwrap();
    let truth = rand_cp(&mut g, &split.dims(), 1);
    let sample = planted_sample(&mut g, &split, &truth, 40, 0.5);
    let labels: Vec<String> = ["a", "a", "b", "b"].iter().map(|s| s.to_string()).collect();
    let opts = RollingOptions {
        group_labels: Some(labels),
        ..RollingOptions::new(6)
    };
    let report = rolling_forecast(&sample, &ridge(1), &opts).unwrap();
    let groups = report.group_errors.unwrap();
    assert_eq!(groups.keys().cloned().collect::<Vec<_>>(), vec!["a".to_string(), "b".to_string()]);
    let mut want_a = 0.0;
    for (k, f) in report.forecasts.iter().enumerate() {
        let y = &sample.responses()[34 + k];
        want_a += ((f.data()[0] - y.data()[0]).powi(2) + (f.data()[1] - y.data()[1]).powi(2)).sqrt();
    }
    assert!((groups["a"] - want_a / 6.0).abs() < 1e-12);
    let bad = RollingOptions {
        group_labels: Some(vec!["a".into()]),
        ..RollingOptions::new(6)
    };
    assert!(matches!(rolling_forecast(&sample, &ridge(1), &bad), Err(EvalError::Argument(_))));
}

#[test]
fn rolling_rejects_bad_test_length() {
    let (sample, _) = noiseless_matrix_model(1, 1, 10);
    for n in [0, 10] {
        assert!(matches!(
            rolling_forecast(&sample, &ridge(1), &RollingOptions::new(n)),
            Err(EvalError::Argument(_))
        ));
    }
}

#[test]
fn forecast_csv_layout() {
    let (sample, truth) = noiseless_matrix_model(2, 1, 20);
    let cfg = FitConfig::new(1).with_init(Init::WarmStart(truth));
    let report = rolling_forecast(&sample, &cfg, &RollingOptions::new(3)).unwrap();
    let text = forecast_csv(&report);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "step,error");
    assert_eq!(lines.len(), 4);
    assert!(lines[3].starts_with("3,"));
}

fn grid(ranks: Vec<usize>) -> CvGrid {
    CvGrid {
        ranks,
        sparsity_sets: vec![None],
        val_length: 8,
    }
}

#[test]
fn cv_recovers_rank_on_noiseless_data() {
    let (sample, _) = noiseless_matrix_model(31, 2, 60);
    let out = cross_validate(&sample, &grid(vec![1, 2, 3]), &ridge(1), true).unwrap();
    assert_eq!(out.table.len(), 3);
    assert!(out.best_rank <= 3);
    let score = |r: usize| *out.table.iter().find(|c| c.rank == r).unwrap().score.as_ref().unwrap();
    assert!(score(2) < 1e-6, "R=2 scored {}", score(2));
    assert!(score(1) > score(2));
}

#[test]
fn cv_single_cell_grid() {
    let (sample, _) = noiseless_matrix_model(32, 1, 40);
    let g = CvGrid {
        ranks: vec![1],
        sparsity_sets: vec![Some(vec![2, 2])],
        val_length: 5,
    };
    let out = cross_validate(&sample, &g, &ridge(1), false).unwrap();
    assert_eq!(out.best_rank, 1);
    assert_eq!(out.best_sparsity, Some(vec![2, 2]));
    assert_eq!(out.table.len(), 1);
}

#[test]
fn cv_table_covers_grid_and_ignores_order() {
    let mut g = rng(33);
    let split = ModeSplit::new(vec![3], vec![3]).unwrap();
    let truth = rand_cp(&mut g, &split.dims(), 1);
    let sample = planted_sample(&mut g, &split, &truth, 50, 0.3);
    let sets = vec![None, Some(vec![1, 1]), Some(vec![2, 3])];
    let forward = CvGrid {
        ranks: vec![1, 2],
        sparsity_sets: sets.clone(),
        val_length: 6,
    };
    let backward = CvGrid {
        ranks: vec![2, 1],
        sparsity_sets: sets.into_iter().rev().collect(),
        val_length: 6,
    };
    let a = cross_validate(&sample, &forward, &ridge(1), true).unwrap();
    let b = cross_validate(&sample, &backward, &ridge(1), false).unwrap();
    assert_eq!(a.table.len(), 6);
    assert_eq!((a.best_rank, &a.best_sparsity), (b.best_rank, &b.best_sparsity));
    for cell in &a.table {
        let twin = b.table.iter().find(|c| c.rank == cell.rank && c.sparsity == cell.sparsity).unwrap();
        assert_eq!(cell.score, twin.score);
    }
    let csv = cv_csv(&a);
    assert_eq!(csv.lines().next(), Some("R,s,fe"));
    assert!(csv.lines().any(|l| l.starts_with("1,2:3,")));
    assert!(csv.lines().any(|l| l.starts_with("2,none,")));
}

#[test]
fn cv_rejects_empty_grid() {
    let (sample, _) = noiseless_matrix_model(34, 1, 20);
    assert!(matches!(
        cross_validate(&sample, &grid(vec![]), &ridge(1), false),
        Err(EvalError::Argument(_))
    ));
}

fn basis(p: usize, i: usize) -> Matrix<f64> {
    let mut v = vec![0.0; p];
    v[i] = 1.0;
    Matrix::from_col_major(p, 1, v).unwrap()
}

#[test]
fn heatmap_of_basis_loadings_has_one_cell() {
    let c = CpTensor::new(vec![2.5], vec![basis(3, 1), basis(4, 2), basis(2, 0)]).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let files = export_heatmaps(&c, &[(0, 0, 1)], dir.path(), false).unwrap();
    assert_eq!(files.len(), 2);
    let text = std::fs::read_to_string(dir.path().join("heatmap_r1_d1x2.csv")).unwrap();
    let rows: Vec<Vec<f64>> =
        text.lines().map(|l| l.split(',').map(|v| v.parse().unwrap()).collect()).collect();
    assert_eq!((rows.len(), rows[0].len()), (3, 4));
    for (i, row) in rows.iter().enumerate() {
        for (j, &v) in row.iter().enumerate() {
            assert_eq!(v, if (i, j) == (1, 2) { 1.0 } else { 0.0 });
        }
    }
    export_heatmaps(&c, &[(0, 0, 1)], dir.path(), true).unwrap();
    let text = std::fs::read_to_string(dir.path().join("heatmap_r1_d1x2.csv")).unwrap();
    assert!(text.contains("2.5"));
}

#[test]
fn heatmaps_equal_interaction_matrices_and_omega_descends() {
    let mut g = rng(35);
    let c = rand_cp(&mut g, &[3, 2, 4], 3);
    let dir = tempfile::tempdir().unwrap();
    export_heatmaps(&c, &[(2, 2, 0), (1, 0, 1)], dir.path(), false).unwrap();
    let text = std::fs::read_to_string(dir.path().join("heatmap_r3_d3x1.csv")).unwrap();
    let m = interaction_matrix(&c, 2, 2, 0).unwrap();
    for (i, line) in text.lines().enumerate() {
        for (j, v) in line.split(',').enumerate() {
            assert_eq!(v.parse::<f64>().unwrap(), m[(i, j)]);
        }
    }
    let omega = std::fs::read_to_string(dir.path().join("omega.csv")).unwrap();
    let mut lines = omega.lines();
    assert_eq!(lines.next(), Some("omega"));
    let w: Vec<f64> = lines.map(|l| l.parse().unwrap()).collect();
    assert_eq!(w.len(), 3);
    assert!(w.windows(2).all(|p| p[0] >= p[1]));
    assert!(matches!(
        export_heatmaps(&c, &[(0, 1, 1)], dir.path(), false),
        Err(EvalError::Argument(_))
    ));
}
