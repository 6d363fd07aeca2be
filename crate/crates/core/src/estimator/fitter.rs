use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

use super::init::{initialize, random_unit, rank_one_approx};
use super::{FitConfig, FitResult, Init, StopReason};
use crate::cp::{cp_contract_predictor, CpTensor, ModeSplit};
use crate::error::{FitError, ModelError};
use crate::matrix::Matrix;
use crate::model::RegressionSample;
use crate::scalar::{axpy, dot, Scalar};
use crate::tensor::{normalize, outer_product, truncate, DenseTensor};

/// `sum_t f_t^2` below this marks a component as dormant.
const DORMANT: f64 = 1e-14;
const REINIT_ATTEMPTS: usize = 3;
const MAX_REFINEMENTS: usize = 100;

/// Mutable state of one alternating-minimization run.
///
/// `run` drives the whole fit; the individual block updates are public so
/// that their monotonicity can be checked in isolation.
#[derive(Debug, Clone)]
pub struct AlternatingFitter<'a, S> {
    sample: &'a RegressionSample<S>,
    config: FitConfig<S>,
    split: ModeSplit,
    weights: Vec<S>,
    /// `loadings[r][d]`, unit norm (and `s_d`-sparse in the sparse variant).
    loadings: Vec<Vec<Vec<S>>>,
    /// `factors[r][t] = f_{r,t}` for the current predictor loadings.
    factors: Vec<Vec<S>>,
    rng: ChaCha20Rng,
    response_energy: S,
}

#[derive(Debug, Clone)]
struct Snapshot<S> {
    weights: Vec<S>,
    loadings: Vec<Vec<Vec<S>>>,
    factors: Vec<Vec<S>>,
}

impl<'a, S: Scalar> AlternatingFitter<'a, S> {
    pub fn new(sample: &'a RegressionSample<S>, config: &FitConfig<S>) -> Result<Self, FitError> {
        config.validate(sample.split())?;
        if !sample.is_finite() {
            return Err(ModelError::Argument("sample contains non-finite values".into()).into());
        }
        let start = initialize(sample, config)?;
        let seed = match &config.init {
            Init::Random { seed } => *seed,
            _ => 0,
        };
        let split = sample.split().clone();
        let rank = config.rank;
        let order = split.order();
        let mut loadings: Vec<Vec<Vec<S>>> = (0..rank)
            .map(|r| (0..order).map(|d| start.loading(r, d).to_vec()).collect())
            .collect();
        let mut weights = start.weights().to_vec();
        let mut truncated = false;
        if let Some(s) = &config.sparsity {
            for comp in loadings.iter_mut() {
                for (d, v) in comp.iter_mut().enumerate() {
                    let t = truncate(v, s[d]);
                    if t != *v {
                        *v = normalize(&t)?;
                        truncated = true;
                    }
                }
            }
        }
        // Components that start with zero weight get weight 1 so the first
        // response update sees a usable direction.
        weights.iter_mut().filter(|w| **w == S::zero()).for_each(|w| *w = S::one());
        let response_energy = sample
            .responses()
            .iter()
            .map(|y| {
                let n = y.frobenius_norm();
                n * n
            })
            .sum();
        let mut fitter = Self {
            sample,
            config: config.clone(),
            split,
            weights,
            loadings,
            factors: vec![Vec::new(); rank],
            rng: ChaCha20Rng::seed_from_u64(seed ^ 0x5eed_d0a7),
            response_energy,
        };
        for r in 0..rank {
            fitter.refresh_factor(r);
        }
        if truncated {
            // Truncation breaks the balance between the starting weights, so
            // they are refit jointly before the first sweep.
            fitter.refit_weights();
        }
        Ok(fitter)
    }

    /// Jointly least-squares weights for the current loadings. Leaves the
    /// weights alone if the normal equations cannot be solved.
    fn refit_weights(&mut self) {
        let rank = self.rank();
        let mut gram = Matrix::zeros(rank, rank);
        let mut rhs = vec![S::zero(); rank];
        for r in 0..rank {
            for q in 0..rank {
                gram[(r, q)] = dot(&self.factors[r], &self.factors[q]) * self.response_overlap(r, q);
            }
            let vecs = self.response_vecs(r);
            for (t, y) in self.sample.responses().iter().enumerate() {
                rhs[r] += self.factors[r][t] * y.contract_all(&vecs).expect("response dims match");
            }
        }
        let trace: S = (0..rank).map(|i| gram[(i, i)]).sum();
        if !(trace > S::zero()) {
            return;
        }
        let Some(w) = solve_refined(&gram, &rhs, self.config.ridge_jitter * trace / S::lit(rank as f64)) else {
            return;
        };
        for (r, mut wr) in w.into_iter().enumerate() {
            if wr < S::zero() {
                wr = -wr;
                self.loadings[r][0].iter_mut().for_each(|v| *v = -*v);
            }
            self.weights[r] = wr;
        }
    }

    pub fn rank(&self) -> usize {
        self.config.rank
    }

    pub fn weights(&self) -> &[S] {
        &self.weights
    }

    pub fn loading(&self, r: usize, d: usize) -> &[S] {
        &self.loadings[r][d]
    }

    pub fn factor_process(&self, r: usize) -> &[S] {
        &self.factors[r]
    }

    /// Current iterate as a canonical CP tensor.
    pub fn estimate(&self) -> CpTensor<S> {
        let dims = self.split.dims();
        let rank = self.rank();
        let factors = dims
            .iter()
            .enumerate()
            .map(|(d, &p)| {
                let mut data = Vec::with_capacity(p * rank);
                for r in 0..rank {
                    data.extend_from_slice(&self.loadings[r][d]);
                }
                Matrix::from_col_major(p, rank, data).expect("loading lengths match dims")
            })
            .collect();
        let mut cp = CpTensor::raw(self.weights.clone(), factors);
        cp.canonicalize();
        cp
    }

    fn response_outer(&self, r: usize) -> DenseTensor<S> {
        let vecs: Vec<&[S]> = self.loadings[r][..self.split.m()].iter().map(Vec::as_slice).collect();
        outer_product(&vecs).expect("non-empty loadings")
    }

    fn response_vecs(&self, r: usize) -> Vec<&[S]> {
        self.loadings[r][..self.split.m()].iter().map(Vec::as_slice).collect()
    }

    fn predictor_vecs(&self, r: usize) -> Vec<&[S]> {
        self.loadings[r][self.split.m()..].iter().map(Vec::as_slice).collect()
    }

    /// `prod_{d<m} <b_{r,d}, b_{q,d}>`, the inner product of unit response outers.
    fn response_overlap(&self, r: usize, q: usize) -> S {
        (0..self.split.m())
            .map(|d| dot(&self.loadings[r][d], &self.loadings[q][d]))
            .fold(S::one(), |a, b| a * b)
    }

    fn refresh_factor(&mut self, r: usize) {
        let vecs = self.predictor_vecs(r);
        let f = self
            .sample
            .predictors()
            .iter()
            .map(|x| x.contract_all(&vecs).expect("predictor dims match"))
            .collect();
        self.factors[r] = f;
    }

    /// Objective `sum_t ||Y_t - sum_r w_r f_{r,t} A_r||_F^2`, evaluated from
    /// materialized predictions.
    pub fn loss(&self) -> S {
        let outers: Vec<DenseTensor<S>> = (0..self.rank()).map(|r| self.response_outer(r)).collect();
        let mut total = S::zero();
        for (t, y) in self.sample.responses().iter().enumerate() {
            let mut resid = y.data().to_vec();
            for (r, a) in outers.iter().enumerate() {
                let c = self.weights[r] * self.factors[r][t];
                if c != S::zero() {
                    axpy(-c, a.data(), &mut resid);
                }
            }
            total += dot(&resid, &resid);
        }
        total
    }

    /// `sum_t f_{r,t} R_{r,t}` expressed through the other components'
    /// response outers, without forming the residuals.
    fn direction_tensor(&self, r: usize) -> DenseTensor<S> {
        let dims = self.split.response_dims().to_vec();
        let mut g = DenseTensor::zeros(dims).expect("valid dims");
        for (t, y) in self.sample.responses().iter().enumerate() {
            let f = self.factors[r][t];
            if f != S::zero() {
                axpy(f, y.data(), g.data_mut());
            }
        }
        for q in 0..self.rank() {
            if q == r || self.weights[q] == S::zero() {
                continue;
            }
            let cross = dot(&self.factors[r], &self.factors[q]);
            let a = self.response_outer(q);
            axpy(-self.weights[q] * cross, a.data(), g.data_mut());
        }
        g
    }

    fn sparsity(&self, d: usize) -> Option<usize> {
        self.config.sparsity.as_ref().map(|s| s[d])
    }

    fn project(&self, v: &[S], d: usize) -> Result<Vec<S>, crate::error::TensorError> {
        match self.sparsity(d) {
            Some(s) => normalize(&truncate(v, s)),
            None => normalize(v),
        }
    }

    /// Response block for component `r`: rank-one fit of the direction tensor
    /// followed by the closed-form weight. Never increases the objective.
    pub fn step1_update_response(&mut self, r: usize) -> Result<(), FitError> {
        let mut ff = dot(&self.factors[r], &self.factors[r]);
        if ff < S::lit(DORMANT) {
            if !self.revive(r)? {
                self.weights[r] = S::zero();
                return Ok(());
            }
            ff = dot(&self.factors[r], &self.factors[r]);
        }
        let m = self.split.m();
        let g = self.direction_tensor(r);
        let a_old = g.contract_all(&self.response_vecs(r))?;
        let mut vecs: Vec<Vec<S>> = self.loadings[r][..m].to_vec();
        'sweeps: for _ in 0..self.config.inner_sweeps {
            for d in 0..m {
                let refs: Vec<&[S]> = vecs.iter().map(Vec::as_slice).collect();
                let v = g.contract_except(&refs, d)?;
                match self.project(&v, d) {
                    Ok(b) => vecs[d] = b,
                    Err(_) => {
                        // The current loadings are orthogonal to G; restart
                        // from its best rank-one direction.
                        match rank_one_approx(&g, 30) {
                            Some((_, best)) => {
                                for (dd, b) in best.iter().enumerate() {
                                    vecs[dd] = self.project(b, dd)?;
                                }
                                continue 'sweeps;
                            }
                            None => {
                                self.weights[r] = S::zero();
                                return Ok(());
                            }
                        }
                    }
                }
            }
        }
        let refs: Vec<&[S]> = vecs.iter().map(Vec::as_slice).collect();
        let a = g.contract_all(&refs)?;
        let mut w = a / ff;
        if w < S::zero() {
            w = -w;
            vecs[0].iter_mut().for_each(|v| *v = -*v);
        }
        // Decrease of `w^2 ff - 2 w <G, A>` when moving to the new loadings
        // with the optimal weight, written to avoid cancellation.
        let w_old = self.weights[r];
        let gain = ff * (w_old - a_old / ff).powi(2) + (a.abs() - a_old.abs()) * (a.abs() + a_old.abs()) / ff;
        let noise = S::lit(8.0) * S::epsilon() * (a * a + a_old * a_old) / ff;
        if gain >= -noise {
            self.weights[r] = w;
            self.loadings[r][..m].clone_from_slice(&vecs);
        } else {
            // Thresholding made the direction worse; keep the loadings and
            // only refit the weight.
            self.weights[r] = a_old / ff;
            if self.weights[r] < S::zero() {
                self.weights[r] = -self.weights[r];
                self.loadings[r][0].iter_mut().for_each(|v| *v = -*v);
            }
        }
        Ok(())
    }

    /// Predictor block for component `r` and predictor mode `d` (`0..n`):
    /// least squares with the scalar response `<R_{r,t}, A_r> / ||A_r||^2`.
    pub fn step2_update_predictor(&mut self, r: usize, d: usize) -> Result<(), FitError> {
        let m = self.split.m();
        let n = self.split.n();
        if d >= n {
            return Err(FitError::Config(format!("predictor mode {d} out of range 0..{n}")));
        }
        let w = self.weights[r];
        if w == S::zero() {
            return Ok(());
        }
        let t_len = self.sample.len();
        let rvecs = self.response_vecs(r);
        let overlaps: Vec<S> = (0..self.rank())
            .map(|q| if q == r { S::zero() } else { self.weights[q] * self.response_overlap(r, q) })
            .collect();
        let mut target = Vec::with_capacity(t_len);
        for (t, y) in self.sample.responses().iter().enumerate() {
            let mut v = y.contract_all(&rvecs)?;
            for (q, &o) in overlaps.iter().enumerate() {
                v -= o * self.factors[q][t];
            }
            target.push(v / w);
        }
        let pvecs = self.predictor_vecs(r);
        let q_d = self.split.predictor_dims()[d];
        let mut gram = Matrix::zeros(q_d, q_d);
        let mut rhs = vec![S::zero(); q_d];
        for (t, x) in self.sample.predictors().iter().enumerate() {
            let z = x.contract_except(&pvecs, d)?;
            axpy(target[t], &z, &mut rhs);
            for j in 0..q_d {
                let zj = z[j];
                if zj != S::zero() {
                    axpy(zj, &z, gram.column_mut(j));
                }
            }
        }
        let trace: S = (0..q_d).map(|i| gram[(i, i)]).sum();
        if !(trace > S::zero()) {
            // Every z vanishes, so the component cannot fit anything.
            self.weights[r] = S::zero();
            return Ok(());
        }
        let coef = solve_refined(&gram, &rhs, self.config.ridge_jitter * trace / S::lit(q_d as f64))
            .ok_or(FitError::LinearSolve { component: r, mode: m + d })?;
        let coef = match self.sparsity(m + d) {
            Some(s) => truncate(&coef, s),
            None => coef,
        };
        let old = self.loadings[r][m + d].clone();
        // q(b) = b'Hb - 2b'c; q(new) - q(old) = delta'(H(new + old) - 2c).
        let delta: Vec<S> = coef.iter().zip(&old).map(|(&a, &b)| a - b).collect();
        let sum: Vec<S> = coef.iter().zip(&old).map(|(&a, &b)| a + b).collect();
        let hs = gram.matvec(&sum).expect("square system");
        let mut change = S::zero();
        let mut noise = S::zero();
        for i in 0..q_d {
            change += delta[i] * (hs[i] - S::lit(2.0) * rhs[i]);
            noise += delta[i].abs() * (hs[i].abs() + S::lit(2.0) * rhs[i].abs());
        }
        if change > S::lit(8.0) * S::epsilon() * noise {
            return Ok(());
        }
        let norm = dot(&coef, &coef).sqrt();
        if !(norm > S::zero()) {
            self.weights[r] = S::zero();
            return Ok(());
        }
        self.weights[r] = w * norm;
        self.loadings[r][m + d] = coef.iter().map(|&c| c / norm).collect();
        self.refresh_factor(r);
        Ok(())
    }

    /// Tries to give a dormant component a usable direction: first the
    /// leading singular pair of the stacked residual, then random loadings.
    /// Returns `false` when the residual is already zero.
    fn revive(&mut self, r: usize) -> Result<bool, FitError> {
        let m = self.split.m();
        let t_len = self.sample.len();
        let p_y = self.split.response_len();
        let mut resid = Matrix::zeros(p_y, t_len);
        let outers: Vec<DenseTensor<S>> = (0..self.rank()).map(|q| self.response_outer(q)).collect();
        for (t, y) in self.sample.responses().iter().enumerate() {
            let col = resid.column_mut(t);
            col.copy_from_slice(y.data());
            for (q, a) in outers.iter().enumerate() {
                if q != r {
                    axpy(-self.weights[q] * self.factors[q][t], a.data(), col);
                }
            }
        }
        let energy = resid.frobenius_norm();
        if !(energy > S::zero()) {
            return Ok(false);
        }
        if let Some((u, v)) = leading_singular_pair(&resid, 50) {
            let q_x = self.split.predictor_len();
            let mut w = vec![S::zero(); q_x];
            for (t, x) in self.sample.predictors().iter().enumerate() {
                axpy(v[t], x.data(), &mut w);
            }
            let resp = DenseTensor::new(self.split.response_dims().to_vec(), u)?;
            let pred = DenseTensor::new(self.split.predictor_dims().to_vec(), w)?;
            if let (Some((_, rv)), Some((_, pv))) = (rank_one_approx(&resp, 30), rank_one_approx(&pred, 30)) {
                let mut ok = true;
                for (d, b) in rv.iter().chain(pv.iter()).enumerate() {
                    match self.project(b, d) {
                        Ok(b) => self.loadings[r][d] = b,
                        Err(_) => ok = false,
                    }
                }
                if ok {
                    self.weights[r] = S::one();
                    self.refresh_factor(r);
                    if dot(&self.factors[r], &self.factors[r]) >= S::lit(DORMANT) {
                        return Ok(true);
                    }
                }
            }
        }
        for _ in 0..REINIT_ATTEMPTS {
            for (d, &p) in self.split.dims().iter().enumerate().skip(m) {
                let b = random_unit(&mut self.rng, p);
                self.loadings[r][d] = self.project(&b, d)?;
            }
            self.weights[r] = S::one();
            self.refresh_factor(r);
            if dot(&self.factors[r], &self.factors[r]) >= S::lit(DORMANT) {
                return Ok(true);
            }
        }
        Err(FitError::Failure {
            reason: format!("component {r} stayed degenerate after {REINIT_ATTEMPTS} re-randomizations"),
            loss_trace: Vec::new(),
        })
    }

    /// One outer iteration: the response block for every component, then the
    /// predictor block for every component and predictor mode. Returns the
    /// objective afterwards.
    pub fn iterate(&mut self) -> Result<S, FitError> {
        for r in 0..self.rank() {
            self.step1_update_response(r)?;
        }
        for r in 0..self.rank() {
            for d in 0..self.split.n() {
                self.step2_update_predictor(r, d)?;
            }
        }
        Ok(self.loss())
    }

    fn snapshot(&self) -> Snapshot<S> {
        Snapshot {
            weights: self.weights.clone(),
            loadings: self.loadings.clone(),
            factors: self.factors.clone(),
        }
    }

    fn restore(&mut self, s: Snapshot<S>) {
        self.weights = s.weights;
        self.loadings = s.loadings;
        self.factors = s.factors;
    }

    /// Iterates until the relative decrease of the objective falls below
    /// `rel_tol`, the fit is exact to working precision, or the iteration cap
    /// is reached.
    pub fn run(mut self) -> Result<FitResult<S>, FitError> {
        let exact = {
            let e = S::lit(1e3) * S::epsilon();
            e * e * self.response_energy
        };
        let mut trace = vec![self.loss()];
        let mut stop = StopReason::MaxIterations;
        let mut iterations = 0;
        if trace[0] <= exact {
            stop = StopReason::Converged;
        }
        while stop == StopReason::MaxIterations && iterations < self.config.max_outer_iters {
            let prev = *trace.last().expect("non-empty");
            let saved = self.snapshot();
            let loss = match self.iterate() {
                Ok(l) => l,
                Err(FitError::Failure { reason, .. }) => {
                    return Err(FitError::Failure {
                        reason,
                        loss_trace: trace.iter().map(|l| l.as_f64()).collect(),
                    })
                }
                Err(e) => return Err(e),
            };
            if !loss.is_finite() {
                return Err(FitError::Failure {
                    reason: "objective became non-finite".into(),
                    loss_trace: trace.iter().map(|l| l.as_f64()).collect(),
                });
            }
            if loss > prev + S::lit(1e-9) + S::lit(1e-12) * prev {
                self.restore(saved);
                stop = StopReason::Stalled;
                break;
            }
            trace.push(loss);
            iterations += 1;
            if prev - loss <= self.config.rel_tol * prev || loss <= exact {
                stop = StopReason::Converged;
            }
        }
        let estimate = CpTensor::new(self.estimate().weights().to_vec(), self.estimate().factors().to_vec())?;
        let t_len = self.sample.len();
        let mut factor_series = Matrix::zeros(estimate.rank(), t_len);
        for (t, x) in self.sample.predictors().iter().enumerate() {
            let (_, f) = cp_contract_predictor(&estimate, &self.split, x)?;
            for (r, v) in f.into_iter().enumerate() {
                factor_series[(r, t)] = v;
            }
        }
        Ok(FitResult {
            estimate,
            loss_trace: trace,
            converged: stop != StopReason::MaxIterations,
            iterations,
            stop_reason: stop,
            factor_series,
        })
    }
}

/// Solves `H x = b` using the Cholesky factor of `H + lambda I` as a
/// preconditioner: the jittered solution is refined against the unjittered
/// `H` until the correction stalls. The refinement converges on the range of
/// `H` and leaves its null space untouched, so singular systems get the
/// minimum-norm least-squares solution.
fn solve_refined<S: Scalar>(h: &Matrix<S>, b: &[S], lambda: S) -> Option<Vec<S>> {
    let mut reg = h.clone();
    for i in 0..h.rows() {
        reg[(i, i)] += lambda;
    }
    let mut x = reg.cholesky_solve(b)?;
    for _ in 0..MAX_REFINEMENTS {
        let hx = h.matvec(&x).ok()?;
        let res: Vec<S> = b.iter().zip(&hx).map(|(&bi, &hi)| bi - hi).collect();
        let dx = reg.cholesky_solve(&res)?;
        x.iter_mut().zip(&dx).for_each(|(xi, &d)| *xi += d);
        if dot(&dx, &dx).sqrt() <= S::lit(4.0) * S::epsilon() * dot(&x, &x).sqrt() {
            break;
        }
    }
    x.iter().all(|v| v.is_finite()).then_some(x)
}

/// Leading left/right singular vectors of `a` by alternating power iteration.
fn leading_singular_pair<S: Scalar>(a: &Matrix<S>, iters: usize) -> Option<(Vec<S>, Vec<S>)> {
    let at = a.transpose();
    let (mut best, mut best_norm) = (0, S::zero());
    for j in 0..a.cols() {
        let n = dot(a.column(j), a.column(j));
        if n > best_norm {
            best = j;
            best_norm = n;
        }
    }
    if !(best_norm > S::zero()) {
        return None;
    }
    let mut u = normalize(a.column(best)).ok()?;
    let mut v = normalize(&at.matvec(&u).ok()?).ok()?;
    for _ in 0..iters {
        u = normalize(&a.matvec(&v).ok()?).ok()?;
        v = normalize(&at.matvec(&u).ok()?).ok()?;
    }
    Some((u, v))
}
