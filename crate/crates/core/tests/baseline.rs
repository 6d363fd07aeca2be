mod common;

use common::*;
use nalgebra::DMatrix;
use tcpr_core::baseline::{
    bench_iteration_cost, lambda_max, lasso_fit, lasso_fit_traced, log_log_slope, soft_threshold, BenchSweep,
    LassoConfig,
};
use tcpr_core::{CpTensor, Matrix, ModeSplit, RegressionSample};

fn design(seed: u64, t: usize) -> RegressionSample<f64> {
    let mut g = rng(seed);
    let split = ModeSplit::new(vec![3], vec![2, 2]).unwrap();
    let truth: CpTensor<f64> = rand_cp(&mut g, &split.dims(), 2);
    planted_sample(&mut g, &split, &truth, t, 0.5)
}

fn stacks(s: &RegressionSample<f64>) -> (DMatrix<f64>, DMatrix<f64>) {
    let t = s.len();
    let py = s.split().response_len();
    let qx = s.split().predictor_len();
    let y: Vec<f64> = s.responses().iter().flat_map(|y| y.data().to_vec()).collect();
    let x: Vec<f64> = s.predictors().iter().flat_map(|x| x.data().to_vec()).collect();
    (DMatrix::from_column_slice(py, t, &y), DMatrix::from_column_slice(qx, t, &x))
}

fn to_dm(m: &Matrix<f64>) -> DMatrix<f64> {
    DMatrix::from_column_slice(m.rows(), m.cols(), m.as_slice())
}

fn tight(lambda: f64) -> LassoConfig<f64> {
    let mut cfg = LassoConfig::new(lambda);
    cfg.max_iters = 50_000;
    cfg.rel_tol = 1e-15;
    cfg
}

#[test]
fn soft_threshold_example() {
    assert!((soft_threshold(0.7f64, 0.2) - 0.5).abs() < 1e-15);
    assert!((soft_threshold(-0.7f64, 0.2) + 0.5).abs() < 1e-15);
    assert_eq!(soft_threshold(0.1, 0.2), 0.0);
}

#[test]
fn zero_penalty_matches_normal_equations() {
    let s = design(40, 100);
    let (y, x) = stacks(&s);
    let direct = &y * x.transpose() * (&x * x.transpose()).try_inverse().unwrap();
    let got = to_dm(&lasso_fit(&s, &tight(0.0)).unwrap());
    assert!((got - direct).abs().max() < 1e-6);
}

#[test]
fn penalty_above_lambda_max_kills_everything() {
    let s = design(41, 50);
    let lmax = lambda_max(&s);
    for lambda in [lmax, 2.0 * lmax] {
        let b = lasso_fit(&s, &LassoConfig::new(lambda)).unwrap();
        assert!(b.as_slice().iter().all(|&v| v == 0.0));
    }
    let b = lasso_fit(&s, &LassoConfig::new(0.9 * lmax)).unwrap();
    assert!(b.as_slice().iter().any(|&v| v != 0.0));
}

#[test]
fn fixed_point_satisfies_subgradient_conditions() {
    let s = design(42, 80);
    let lambda = 0.2 * lambda_max(&s);
    let b = to_dm(&lasso_fit(&s, &tight(lambda)).unwrap());
    let (y, x) = stacks(&s);
    // gradient of (1/2T) ||Y - B X||^2
    let grad = -(&y - &b * &x) * x.transpose() / s.len() as f64;
    let mut zeros = 0;
    for (g, &v) in grad.iter().zip(b.iter()) {
        if v != 0.0 {
            assert!((g + lambda * v.signum()).abs() < 1e-5);
        } else {
            zeros += 1;
            assert!(g.abs() <= lambda + 1e-5);
        }
    }
    assert!(zeros > 0);
}

#[test]
fn objective_never_increases() {
    let s = design(43, 60);
    for frac in [0.0, 0.05, 0.3] {
        let mut cfg = LassoConfig::new(frac * lambda_max(&s));
        cfg.max_iters = 300;
        let res = lasso_fit_traced(&s, &cfg).unwrap();
        for w in res.objective_trace.windows(2) {
            assert!(w[1] <= w[0] + 1e-10);
        }
    }
}

#[test]
fn estimate_is_a_dense_matrix() {
    let s = design(44, 60);
    let b = lasso_fit(&s, &LassoConfig::new(0.0)).unwrap();
    assert_eq!((b.rows(), b.cols()), (3, 4));
}

#[test]
fn single_entry_bench_is_fast() {
    let mut sweep = BenchSweep::new(vec![1], 1, 20);
    sweep.iterations = 3;
    let rows = bench_iteration_cost(&sweep).unwrap();
    assert_eq!(rows.len(), 2);
    assert!(rows.iter().all(|r| r.mean_iter_micros < 1000.0));
    assert!(log_log_slope(&rows, "ista").is_none());
}

fn min_cost(t: usize, method: &str) -> f64 {
    let mut sweep = BenchSweep::new(vec![4], 2, t);
    sweep.iterations = 20;
    (0..3)
        .map(|_| {
            bench_iteration_cost(&sweep)
                .unwrap()
                .into_iter()
                .find(|r| r.method == method)
                .unwrap()
                .mean_iter_micros
        })
        .fold(f64::INFINITY, f64::min)
}

#[test]
fn per_iteration_cost_is_linear_in_t() {
    for method in ["ista", "cp_als"] {
        let ratio = min_cost(400, method) / min_cost(200, method);
        assert!((1.0..=3.0).contains(&ratio), "{method}: doubling T scaled cost by {ratio}");
    }
}
