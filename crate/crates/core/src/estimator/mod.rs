//! CP low-rank and sparse CP low-rank estimators.
//!
//! Both minimize `sum_t ||Y_t - sum_r w_r f_{r,t} b_{r,1} o ... o b_{r,m}||_F^2`
//! with `f_{r,t} = X_t x_1 b_{r,m+1} ... x_n b_{r,m+n}` over unit-norm
//! loadings; the sparse variant additionally caps `||b_{r,d}||_0 <= s_d`.
//! The fitter alternates between the response block (weights and response
//! loadings, a rank-one decomposition per component) and the predictor block
//! (one least-squares problem with a scalar response per component and mode).

mod fitter;
mod init;

pub use fitter::AlternatingFitter;
pub use init::{initialize, rank_one_approx};

use crate::cp::{cp_contract_predictor, CpTensor, ModeSplit};
use crate::error::FitError;
use crate::matrix::Matrix;
use crate::model::RegressionSample;
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq)]
pub enum Init<S> {
    /// Gaussian unit loadings from a seeded generator, all weights 1.
    Random { seed: u64 },
    /// Vectorized Lasso estimate followed by greedy rank-one deflation.
    Lasso { lambda: S, ista_iters: usize },
    /// Ridge estimate of the unconstrained coefficient matrix (penalty
    /// `penalty` times the mean squared predictor norm), then a rank-`R` CP
    /// fit of that pilot from `restarts` random starts.
    Ridge { penalty: S, restarts: usize },
    WarmStart(CpTensor<S>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitConfig<S> {
    pub rank: usize,
    /// Per-mode sparsity caps `s_1..s_N`; `None` fits the non-sparse estimator.
    pub sparsity: Option<Vec<usize>>,
    pub max_outer_iters: usize,
    /// Stop when the objective drops by less than `rel_tol` relative to its
    /// previous value.
    pub rel_tol: S,
    pub init: Init<S>,
    /// Ridge added to predictor Gram systems, relative to their mean diagonal.
    pub ridge_jitter: S,
    /// Passes over the response modes per response-block update.
    pub inner_sweeps: usize,
}

impl<S: Scalar> FitConfig<S> {
    pub fn new(rank: usize) -> Self {
        Self {
            rank,
            sparsity: None,
            max_outer_iters: 200,
            rel_tol: S::lit(1e-6),
            init: Init::Random { seed: 0 },
            ridge_jitter: S::lit(1e-8),
            inner_sweeps: 1,
        }
    }

    pub fn with_sparsity(mut self, sparsity: Vec<usize>) -> Self {
        self.sparsity = Some(sparsity);
        self
    }

    pub fn with_init(mut self, init: Init<S>) -> Self {
        self.init = init;
        self
    }

    pub fn with_max_iters(mut self, iters: usize) -> Self {
        self.max_outer_iters = iters;
        self
    }

    pub fn with_rel_tol(mut self, tol: S) -> Self {
        self.rel_tol = tol;
        self
    }

    pub fn validate(&self, split: &ModeSplit) -> Result<(), FitError> {
        if self.rank == 0 {
            return Err(FitError::Config("rank must be at least 1".into()));
        }
        if !(self.rel_tol > S::zero()) {
            return Err(FitError::Config("rel_tol must be positive".into()));
        }
        if !(self.ridge_jitter >= S::zero()) {
            return Err(FitError::Config("ridge_jitter must be non-negative".into()));
        }
        if self.inner_sweeps == 0 {
            return Err(FitError::Config("inner_sweeps must be at least 1".into()));
        }
        if let Some(s) = &self.sparsity {
            let dims = split.dims();
            if s.len() != dims.len() {
                return Err(FitError::Config(format!(
                    "sparsity has {} entries, the coefficient tensor has {} modes",
                    s.len(),
                    dims.len()
                )));
            }
            if let Some(d) = (0..s.len()).find(|&d| s[d] == 0 || s[d] > dims[d]) {
                return Err(FitError::Config(format!(
                    "sparsity {} for mode {d} must lie in 1..={}",
                    s[d], dims[d]
                )));
            }
        }
        if let Init::WarmStart(c) = &self.init {
            if !c.conforms_to(split) || c.rank() != self.rank {
                return Err(FitError::Config(format!(
                    "warm start has dims {:?} and rank {}, expected {:?} and rank {}",
                    c.dims(),
                    c.rank(),
                    split.dims(),
                    self.rank
                )));
            }
        }
        if let Init::Lasso { lambda, .. } = &self.init {
            if !(*lambda >= S::zero()) {
                return Err(FitError::Config("lasso lambda must be non-negative".into()));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    /// Relative objective change fell below `rel_tol` (or the fit is exact).
    Converged,
    MaxIterations,
    /// An outer iteration of the sparse map would have increased the
    /// objective; the previous iterate is returned.
    Stalled,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitResult<S> {
    /// Canonical estimate: unit loadings, weights non-negative and descending.
    pub estimate: CpTensor<S>,
    /// Objective after initialization and after every accepted iteration.
    pub loss_trace: Vec<S>,
    pub converged: bool,
    pub iterations: usize,
    pub stop_reason: StopReason,
    /// `R x T` matrix of the factor processes `f_{r,t}` under `estimate`.
    pub factor_series: Matrix<S>,
}

impl<S: Scalar> FitResult<S> {
    pub fn final_loss(&self) -> S {
        *self.loss_trace.last().expect("trace is never empty")
    }
}

/// Fits the (sparse) CP low-rank regression to `sample`.
pub fn fit<S: Scalar>(sample: &RegressionSample<S>, config: &FitConfig<S>) -> Result<FitResult<S>, FitError> {
    AlternatingFitter::new(sample, config)?.run()
}

/// Fits from every initialization in `starts` and keeps the fit with the
/// lowest final objective (the first one on ties). Fails only if every start
/// fails, with the first error.
pub fn fit_multistart<S: Scalar>(
    sample: &RegressionSample<S>,
    config: &FitConfig<S>,
    starts: &[Init<S>],
) -> Result<FitResult<S>, FitError> {
    if starts.is_empty() {
        return Err(FitError::Config("at least one start is required".into()));
    }
    let mut best: Option<FitResult<S>> = None;
    let mut first_err = None;
    for init in starts {
        match fit(sample, &config.clone().with_init(init.clone())) {
            Ok(res) => {
                if best.as_ref().is_none_or(|b| res.final_loss() < b.final_loss()) {
                    best = Some(res);
                }
            }
            Err(e) => {
                first_err.get_or_insert(e);
            }
        }
    }
    best.ok_or_else(|| first_err.expect("some start ran"))
}

/// Non-sparse and sparse fits produced by [`fit_staged`].
#[derive(Debug, Clone)]
pub struct StagedFit<S> {
    /// Lowest-objective non-sparse fit over the starts.
    pub dense: FitResult<S>,
    /// Lowest-objective sparse fit, each warm-started from a non-sparse fit.
    pub sparse: FitResult<S>,
}

/// Sparse fitting in two stages: from every start, fit without sparsity and
/// then refine that estimate under the caps of `config.sparsity`.
///
/// Truncating from the first iteration tends to lock in a wrong support,
/// whereas truncating a converged non-sparse estimate keeps its strongest
/// entries.
pub fn fit_staged<S: Scalar>(
    sample: &RegressionSample<S>,
    config: &FitConfig<S>,
    starts: &[Init<S>],
) -> Result<StagedFit<S>, FitError> {
    if config.sparsity.is_none() {
        return Err(FitError::Config("staged fitting needs sparsity caps".into()));
    }
    if starts.is_empty() {
        return Err(FitError::Config("at least one start is required".into()));
    }
    let mut dense_cfg = config.clone();
    dense_cfg.sparsity = None;
    let mut dense: Option<FitResult<S>> = None;
    let mut sparse: Option<FitResult<S>> = None;
    let mut first_err = None;
    for init in starts {
        let pair = fit(sample, &dense_cfg.clone().with_init(init.clone())).and_then(|d| {
            let warm = config.clone().with_init(Init::WarmStart(d.estimate.clone()));
            Ok((fit(sample, &warm)?, d))
        });
        match pair {
            Ok((s, d)) => {
                if dense.as_ref().is_none_or(|b| d.final_loss() < b.final_loss()) {
                    dense = Some(d);
                }
                if sparse.as_ref().is_none_or(|b| s.final_loss() < b.final_loss()) {
                    sparse = Some(s);
                }
            }
            Err(e) => {
                first_err.get_or_insert(e);
            }
        }
    }
    match (dense, sparse) {
        (Some(dense), Some(sparse)) => Ok(StagedFit { dense, sparse }),
        _ => Err(first_err.expect("some start ran")),
    }
}

/// `Random { seed }` starts for `seed = first..first + count`.
pub fn random_starts<S>(first: u64, count: usize) -> Vec<Init<S>> {
    (0..count as u64).map(|k| Init::Random { seed: first + k }).collect()
}

/// One-step predictions `<B, X_t>` for every predictor in `sample`.
pub fn predict<S: Scalar>(
    estimate: &CpTensor<S>,
    sample: &RegressionSample<S>,
) -> Result<Vec<crate::tensor::DenseTensor<S>>, FitError> {
    sample
        .predictors()
        .iter()
        .map(|x| Ok(cp_contract_predictor(estimate, sample.split(), x)?.0))
        .collect()
}
