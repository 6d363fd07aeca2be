use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};

use super::{FitConfig, Init};
use crate::baseline::{lasso_fit, LassoConfig};
use crate::cp::CpTensor;
use crate::error::FitError;
use crate::matrix::Matrix;
use crate::model::RegressionSample;
use crate::scalar::Scalar;
use crate::tensor::{normalize, outer_product, DenseTensor};

pub(crate) fn random_unit<S: Scalar>(rng: &mut ChaCha20Rng, len: usize) -> Vec<S> {
    loop {
        let v: Vec<S> = (0..len)
            .map(|_| S::lit(StandardNormal.sample(&mut *rng)))
            .collect();
        if let Ok(u) = normalize(&v) {
            return u;
        }
    }
}

/// Starting point for the alternating fitter according to `config.init`.
///
/// Random draws are taken component by component, mode by mode, from a
/// ChaCha20 stream seeded with `seed`, so the result is bit-reproducible.
pub fn initialize<S: Scalar>(
    sample: &RegressionSample<S>,
    config: &FitConfig<S>,
) -> Result<CpTensor<S>, FitError> {
    config.validate(sample.split())?;
    let dims = sample.split().dims();
    match &config.init {
        Init::Random { seed } => {
            let mut rng = ChaCha20Rng::seed_from_u64(*seed);
            Ok(random_cp(&mut rng, &dims, config.rank))
        }
        Init::WarmStart(c) => Ok(c.clone()),
        Init::Ridge { penalty, restarts } => ridge_cp(sample, config, *penalty, *restarts),
        Init::Lasso { lambda, ista_iters } => {
            let mut lasso = LassoConfig::new(*lambda);
            lasso.max_iters = *ista_iters;
            let b = lasso_fit(sample, &lasso)?;
            let dense = DenseTensor::new(dims.clone(), b.into_vec())?;
            let mut rng = ChaCha20Rng::seed_from_u64(0);
            Ok(deflate(dense, config.rank, 30, &mut rng))
        }
    }
}

/// Ridge pilot `B0 = Y (X'X + lambda I)^{-1} X'`, solved in the `T x T`
/// dual form.
fn ridge_cp<S: Scalar>(
    sample: &RegressionSample<S>,
    config: &FitConfig<S>,
    penalty: S,
    restarts: usize,
) -> Result<CpTensor<S>, FitError> {
    if !(penalty > S::zero()) || restarts == 0 {
        return Err(FitError::Config("ridge init needs a positive penalty and at least one restart".into()));
    }
    let split = sample.split();
    let (t, p, q) = (sample.len(), split.response_len(), split.predictor_len());
    let mut x = Matrix::zeros(q, t);
    let mut y = Matrix::zeros(p, t);
    for i in 0..t {
        x.column_mut(i).copy_from_slice(sample.predictors()[i].data());
        y.column_mut(i).copy_from_slice(sample.responses()[i].data());
    }
    let mut gram = x.transpose().matmul(&x)?;
    let mean_diag = (0..t).fold(S::zero(), |acc, i| acc + gram[(i, i)]) / S::lit(t as f64);
    let shift = penalty * mean_diag.max(S::min_positive_value());
    for i in 0..t {
        gram[(i, i)] += shift;
    }
    let mut coef = Matrix::zeros(p, t);
    for i in 0..p {
        let sol = gram
            .cholesky_solve(&y.row(i))
            .ok_or(FitError::LinearSolve { component: 0, mode: 0 })?;
        for (j, v) in sol.into_iter().enumerate() {
            coef[(i, j)] = v;
        }
    }
    let pilot = coef.matmul(&x.transpose())?;
    decompose_pilot(sample, config, &pilot, restarts)
}

/// Rank-`R` CP fit of an unconstrained `p x q` coefficient matrix, by
/// running the alternating fitter on an identity design whose responses are
/// the columns of `pilot`. This minimizes `||pilot - B||_F`, honouring the
/// sparsity caps of `config`.
pub(crate) fn decompose_pilot<S: Scalar>(
    sample: &RegressionSample<S>,
    config: &FitConfig<S>,
    pilot: &Matrix<S>,
    restarts: usize,
) -> Result<CpTensor<S>, FitError> {
    let split = sample.split();
    let q = split.predictor_len();
    let mut responses = Vec::with_capacity(q);
    let mut predictors = Vec::with_capacity(q);
    for j in 0..q {
        responses.push(DenseTensor::new(split.response_dims().to_vec(), pilot.column(j).to_vec())?);
        let mut e = vec![S::zero(); q];
        e[j] = S::one();
        predictors.push(DenseTensor::new(split.predictor_dims().to_vec(), e)?);
    }
    let design = RegressionSample::new(split.clone(), responses, predictors)?;
    let mut inner = FitConfig::new(config.rank).with_max_iters(500);
    inner.sparsity = config.sparsity.clone();
    Ok(super::fit_multistart(&design, &inner, &super::random_starts(0, restarts))?.estimate)
}

pub(crate) fn random_cp<S: Scalar>(rng: &mut ChaCha20Rng, dims: &[usize], rank: usize) -> CpTensor<S> {
    let mut cols: Vec<Vec<S>> = vec![Vec::new(); dims.len()];
    for _ in 0..rank {
        for (d, &p) in dims.iter().enumerate() {
            cols[d].extend(random_unit::<S>(rng, p));
        }
    }
    let factors = cols
        .into_iter()
        .zip(dims)
        .map(|(c, &p)| Matrix::from_col_major(p, rank, c).expect("sized above"))
        .collect();
    CpTensor::new(vec![S::one(); rank], factors).expect("unit loadings")
}

/// Greedy CP extraction: repeatedly takes the best rank-one approximation
/// of the residual and subtracts it. Components that cannot be extracted
/// (zero residual) are filled with random unit loadings and unit weight.
pub(crate) fn deflate<S: Scalar>(
    mut residual: DenseTensor<S>,
    rank: usize,
    sweeps: usize,
    rng: &mut ChaCha20Rng,
) -> CpTensor<S> {
    let dims = residual.dims().to_vec();
    let mut weights = Vec::with_capacity(rank);
    let mut cols: Vec<Vec<S>> = vec![Vec::new(); dims.len()];
    for _ in 0..rank {
        let (w, vecs) = match rank_one_approx(&residual, sweeps) {
            Some((w, vecs)) if w > S::zero() => {
                let refs: Vec<&[S]> = vecs.iter().map(Vec::as_slice).collect();
                let comp = outer_product(&refs).expect("non-empty loadings");
                residual.add_scaled(-w, &comp).expect("same dims");
                (w, vecs)
            }
            _ => (S::one(), dims.iter().map(|&p| random_unit(rng, p)).collect()),
        };
        weights.push(w);
        for (d, v) in vecs.into_iter().enumerate() {
            cols[d].extend(v);
        }
    }
    let factors = cols
        .into_iter()
        .zip(&dims)
        .map(|(c, &p)| Matrix::from_col_major(p, rank, c).expect("sized above"))
        .collect();
    let mut cp = CpTensor::raw(weights, factors);
    cp.canonicalize();
    CpTensor::new(cp.weights().to_vec(), cp.factors().to_vec()).expect("unit loadings")
}

/// Best rank-one approximation `w b_1 o ... o b_K` by alternating power
/// iterations (`sweeps` passes), started from the fibers through the
/// largest-magnitude entry. Returns `None` for a zero tensor. The weight is
/// non-negative.
pub fn rank_one_approx<S: Scalar>(t: &DenseTensor<S>, sweeps: usize) -> Option<(S, Vec<Vec<S>>)> {
    let (argmax, max) = t
        .data()
        .iter()
        .enumerate()
        .fold((0, S::zero()), |(bi, bv), (i, &v)| if v.abs() > bv { (i, v.abs()) } else { (bi, bv) });
    if !(max > S::zero()) {
        return None;
    }
    let dims = t.dims().to_vec();
    let mut idx = vec![0usize; dims.len()];
    let mut rem = argmax;
    for (d, &p) in dims.iter().enumerate() {
        idx[d] = rem % p;
        rem /= p;
    }
    let mut vecs: Vec<Vec<S>> = Vec::with_capacity(dims.len());
    for d in 0..dims.len() {
        let mut j = idx.clone();
        let fiber: Vec<S> = (0..dims[d])
            .map(|i| {
                j[d] = i;
                t.get(&j)
            })
            .collect();
        vecs.push(normalize(&fiber).ok()?);
    }
    if dims.len() > 1 {
        for _ in 0..sweeps {
            for d in 0..dims.len() {
                let refs: Vec<&[S]> = vecs.iter().map(Vec::as_slice).collect();
                let v = t.contract_except(&refs, d).ok()?;
                vecs[d] = normalize(&v).ok()?;
            }
        }
    }
    let refs: Vec<&[S]> = vecs.iter().map(Vec::as_slice).collect();
    let mut w = t.contract_all(&refs).ok()?;
    if w < S::zero() {
        w = -w;
        vecs[0].iter_mut().for_each(|v| *v = -*v);
    }
    Some((w, vecs))
}
