//! Vectorized Lasso baseline, `vec(Y_t) = B vec(X_t) + e_t`, solved by ISTA
//! (proximal gradient without acceleration).
//!
//! The objective is `(1/2T) sum_t ||y_t - B x_t||^2 + lambda ||vec(B)||_1`,
//! for which `lambda_max = max |(1/T) sum_t y_t x_t^T|` is the smallest
//! penalty returning `B = 0`. Each iteration costs `O(T p_y q_x)`.

mod bench;

pub use bench::{bench_csv, bench_iteration_cost, log_log_slope, write_bench_csv, BenchRow, BenchSweep};

use crate::error::LassoError;
use crate::matrix::Matrix;
use crate::model::RegressionSample;
use crate::scalar::{dot, Scalar};

#[derive(Debug, Clone, PartialEq)]
pub struct LassoConfig<S> {
    pub lambda: S,
    pub max_iters: usize,
    /// Fixed initial step; `None` uses `1/L` with `L` from power iteration.
    pub step: Option<S>,
    /// Stop when `||B_{k+1} - B_k||_F <= rel_tol * max(||B_k||_F, 1)`.
    pub rel_tol: S,
}

impl<S: Scalar> LassoConfig<S> {
    pub fn new(lambda: S) -> Self {
        Self {
            lambda,
            max_iters: 500,
            step: None,
            rel_tol: S::lit(1e-7),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LassoFit<S> {
    /// `p_y x q_x` coefficient matrix (no low-rank structure).
    pub coefficients: Matrix<S>,
    pub objective_trace: Vec<S>,
    pub iterations: usize,
    pub converged: bool,
}

pub fn soft_threshold<S: Scalar>(v: S, threshold: S) -> S {
    if v > threshold {
        v - threshold
    } else if v < -threshold {
        v + threshold
    } else {
        S::zero()
    }
}

/// Stacks `vec(Y_t)` and `vec(X_t)` as the columns of `p_y x T` and `q_x x T`
/// matrices.
pub(crate) fn stacked<S: Scalar>(sample: &RegressionSample<S>) -> (Matrix<S>, Matrix<S>) {
    let t = sample.len();
    let ys: Vec<S> = sample.responses().iter().flat_map(|y| y.data().iter().copied()).collect();
    let xs: Vec<S> = sample.predictors().iter().flat_map(|x| x.data().iter().copied()).collect();
    let py = sample.split().response_len();
    let qx = sample.split().predictor_len();
    (
        Matrix::from_col_major(py, t, ys).expect("stacked responses"),
        Matrix::from_col_major(qx, t, xs).expect("stacked predictors"),
    )
}

/// `max |(1/T) sum_t y_t x_t^T|` over all entries.
pub fn lambda_max<S: Scalar>(sample: &RegressionSample<S>) -> S {
    let (y, x) = stacked(sample);
    let cross = y.matmul(&x.transpose()).expect("conforming stacks");
    let t = S::from_usize(sample.len()).unwrap();
    cross.as_slice().iter().fold(S::zero(), |m, &v| m.max(v.abs())) / t
}

/// Proximal-gradient state for one Lasso problem; `step()` performs a
/// single ISTA iteration.
pub struct IstaSolver<S> {
    y: Matrix<S>,
    x: Matrix<S>,
    xt: Matrix<S>,
    coef: Matrix<S>,
    residual: Matrix<S>,
    lipschitz: S,
    lambda: S,
    inv_t: S,
}

impl<S: Scalar> IstaSolver<S> {
    pub fn new(sample: &RegressionSample<S>, config: &LassoConfig<S>) -> Result<Self, LassoError> {
        if !(config.lambda >= S::zero()) || !config.lambda.is_finite() {
            return Err(LassoError::Config(format!("lambda must be >= 0, got {}", config.lambda)));
        }
        if !sample.is_finite() {
            return Err(LassoError::Data("sample contains non-finite values".into()));
        }
        let (y, x) = stacked(sample);
        let inv_t = S::one() / S::from_usize(sample.len()).unwrap();
        let lipschitz = match config.step {
            Some(step) if step > S::zero() => S::one() / step,
            Some(step) => return Err(LassoError::Config(format!("step must be positive, got {step}"))),
            None => gram_top_eigenvalue(&x, 30) * inv_t,
        };
        let coef = Matrix::zeros(y.rows(), x.rows());
        let residual = y.clone();
        Ok(Self {
            xt: x.transpose(),
            y,
            x,
            coef,
            residual,
            lipschitz: lipschitz.max(S::min_positive_value()),
            lambda: config.lambda,
            inv_t,
        })
    }

    pub fn coefficients(&self) -> &Matrix<S> {
        &self.coef
    }

    pub fn into_coefficients(self) -> Matrix<S> {
        self.coef
    }

    pub fn lipschitz(&self) -> S {
        self.lipschitz
    }

    fn smooth_part(&self, residual: &Matrix<S>) -> S {
        let r = residual.as_slice();
        dot(r, r) * self.inv_t / S::lit(2.0)
    }

    pub fn objective(&self) -> S {
        let l1: S = self.coef.as_slice().iter().map(|v| v.abs()).sum();
        self.smooth_part(&self.residual) + self.lambda * l1
    }

    /// One proximal-gradient step with backtracking on the Lipschitz
    /// estimate (it only ever grows). Returns `||B_{k+1} - B_k||_F`.
    pub fn step(&mut self) -> S {
        // gradient of the smooth part: -(1/T) E X^T
        let mut grad = self.residual.matmul(&self.xt).expect("conforming");
        grad.scale(-self.inv_t);
        let f_old = self.smooth_part(&self.residual);
        loop {
            let step = S::one() / self.lipschitz;
            let thr = self.lambda * step;
            let next: Vec<S> = self
                .coef
                .as_slice()
                .iter()
                .zip(grad.as_slice())
                .map(|(&b, &g)| soft_threshold(b - step * g, thr))
                .collect();
            let next = Matrix::from_col_major(self.coef.rows(), self.coef.cols(), next).unwrap();
            let mut residual = self.y.clone();
            let fitted = next.matmul(&self.x).expect("conforming");
            crate::scalar::axpy(-S::one(), fitted.as_slice(), residual.as_mut_slice());
            let diff: Vec<S> = next
                .as_slice()
                .iter()
                .zip(self.coef.as_slice())
                .map(|(&a, &b)| a - b)
                .collect();
            let bound = f_old
                + dot(grad.as_slice(), &diff)
                + self.lipschitz / S::lit(2.0) * dot(&diff, &diff);
            let f_new = self.smooth_part(&residual);
            if f_new <= bound + S::epsilon() * f_old.abs() {
                self.coef = next;
                self.residual = residual;
                return dot(&diff, &diff).sqrt();
            }
            self.lipschitz *= S::lit(2.0);
        }
    }
}

/// Largest eigenvalue of `X X^T` by power iteration (`iters` steps).
fn gram_top_eigenvalue<S: Scalar>(x: &Matrix<S>, iters: usize) -> S {
    let n = x.rows();
    let xt = x.transpose();
    let mut v = vec![S::one() / S::from_usize(n).unwrap().sqrt(); n];
    let mut lambda = S::zero();
    for _ in 0..iters {
        let u = xt.matvec(&v).expect("conforming");
        let w = x.matvec(&u).expect("conforming");
        let nw = crate::scalar::norm2(&w);
        if nw == S::zero() {
            return S::zero();
        }
        lambda = dot(&v, &w);
        v = w.iter().map(|&a| a / nw).collect();
    }
    lambda
}

/// Runs ISTA to convergence and returns the trace of objective values.
pub fn lasso_fit_traced<S: Scalar>(
    sample: &RegressionSample<S>,
    config: &LassoConfig<S>,
) -> Result<LassoFit<S>, LassoError> {
    let mut solver = IstaSolver::new(sample, config)?;
    let mut trace = vec![solver.objective()];
    let mut converged = false;
    let mut iterations = 0;
    while iterations < config.max_iters {
        let before = solver.coef.frobenius_norm();
        let change = solver.step();
        iterations += 1;
        trace.push(solver.objective());
        if change <= config.rel_tol * before.max(S::one()) {
            converged = true;
            break;
        }
    }
    Ok(LassoFit {
        coefficients: solver.into_coefficients(),
        objective_trace: trace,
        iterations,
        converged,
    })
}

/// Lasso estimate of the `p_y x q_x` matricized coefficient.
pub fn lasso_fit<S: Scalar>(
    sample: &RegressionSample<S>,
    config: &LassoConfig<S>,
) -> Result<Matrix<S>, LassoError> {
    Ok(lasso_fit_traced(sample, config)?.coefficients)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cp::ModeSplit;
    use crate::tensor::DenseTensor;

    fn toy_sample() -> RegressionSample<f64> {
        let split = ModeSplit::new(vec![2], vec![2]).unwrap();
        let xs = [[1.0, 0.0], [0.0, 1.0], [1.0, 1.0], [2.0, -1.0]];
        let b = [[0.5, -0.3], [0.2, 0.8]];
        let mut ys = Vec::new();
        let mut xt = Vec::new();
        for x in xs {
            let y = [b[0][0] * x[0] + b[0][1] * x[1], b[1][0] * x[0] + b[1][1] * x[1]];
            ys.push(DenseTensor::new(vec![2], y.to_vec()).unwrap());
            xt.push(DenseTensor::new(vec![2], x.to_vec()).unwrap());
        }
        RegressionSample::new(split, ys, xt).unwrap()
    }

    #[test]
    fn soft_threshold_shrinks() {
        assert!((soft_threshold(0.7f64, 0.2) - 0.5).abs() < 1e-15);
        assert!((soft_threshold(-0.7f64, 0.2) + 0.5).abs() < 1e-15);
        assert_eq!(soft_threshold(0.1, 0.2), 0.0);
    }

    #[test]
    fn large_penalty_kills_everything() {
        let s = toy_sample();
        let lmax = lambda_max(&s);
        let b = lasso_fit(&s, &LassoConfig::new(lmax)).unwrap();
        assert!(b.as_slice().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn zero_penalty_recovers_noiseless_coefficients() {
        let s = toy_sample();
        let mut cfg = LassoConfig::new(0.0);
        cfg.max_iters = 20_000;
        cfg.rel_tol = 1e-14;
        let b = lasso_fit(&s, &cfg).unwrap();
        let want = [0.5, 0.2, -0.3, 0.8];
        for (got, want) in b.as_slice().iter().zip(want) {
            assert!((got - want).abs() < 1e-8, "{got} vs {want}");
        }
    }

    #[test]
    fn rejects_bad_inputs() {
        let s = toy_sample();
        assert!(matches!(IstaSolver::new(&s, &LassoConfig::new(-1.0)), Err(LassoError::Config(_))));
        let split = ModeSplit::new(vec![1], vec![1]).unwrap();
        let bad = RegressionSample::new(
            split,
            vec![DenseTensor::new(vec![1], vec![f64::NAN]).unwrap()],
            vec![DenseTensor::new(vec![1], vec![1.0]).unwrap()],
        )
        .unwrap();
        assert!(matches!(lasso_fit(&bad, &LassoConfig::new(0.1)), Err(LassoError::Data(_))));
    }
}
