//! Shared generators and brute-force index-loop oracles for the integration
//! tests. Nothing here calls the library kernels under test.

#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};
use tcpr_core::{CpTensor, DenseTensor, Matrix, ModeSplit, RegressionSample};

pub fn rng(seed: u64) -> ChaCha20Rng {
    ChaCha20Rng::seed_from_u64(seed)
}

pub fn gauss(rng: &mut ChaCha20Rng) -> f64 {
    StandardNormal.sample(rng)
}

pub fn gauss_vec(rng: &mut ChaCha20Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| gauss(rng)).collect()
}

pub fn rand_dims(rng: &mut ChaCha20Rng, order: usize, max: usize) -> Vec<usize> {
    (0..order).map(|_| rng.random_range(1..=max)).collect()
}

pub fn rand_tensor(rng: &mut ChaCha20Rng, dims: &[usize]) -> DenseTensor<f64> {
    let n = dims.iter().product();
    DenseTensor::new(dims.to_vec(), gauss_vec(rng, n)).unwrap()
}

pub fn rand_matrix(rng: &mut ChaCha20Rng, rows: usize, cols: usize) -> Matrix<f64> {
    Matrix::from_col_major(rows, cols, gauss_vec(rng, rows * cols)).unwrap()
}

/// Random CP tensor with Gaussian loadings and weights in `[0.5, 2)`.
pub fn rand_cp(rng: &mut ChaCha20Rng, dims: &[usize], rank: usize) -> CpTensor<f64> {
    let weights = (0..rank).map(|_| rng.random_range(0.5..2.0)).collect();
    let factors = dims.iter().map(|&p| rand_matrix(rng, p, rank)).collect();
    CpTensor::from_loadings(weights, factors).unwrap()
}

/// All multi-indices of `dims`, first index fastest.
pub fn multi_indices(dims: &[usize]) -> Vec<Vec<usize>> {
    let mut out = vec![vec![]];
    for &p in dims {
        let mut next = Vec::with_capacity(out.len() * p);
        for i in 0..p {
            for idx in &out {
                let mut v: Vec<usize> = idx.clone();
                v.push(i);
                next.push(v);
            }
        }
        out = next;
    }
    // `next` above grows the last index slowest, which is column-major order
    out
}

pub fn offset(dims: &[usize], idx: &[usize]) -> usize {
    let mut off = 0;
    let mut stride = 1;
    for (&i, &p) in idx.iter().zip(dims) {
        off += i * stride;
        stride *= p;
    }
    off
}

pub fn outer_oracle(vectors: &[Vec<f64>]) -> Vec<f64> {
    let dims: Vec<usize> = vectors.iter().map(Vec::len).collect();
    multi_indices(&dims)
        .iter()
        .map(|idx| idx.iter().zip(vectors).map(|(&i, v)| v[i]).product())
        .collect()
}

/// `(T x_mode M)` by explicit loops.
pub fn mode_multiply_oracle(t: &DenseTensor<f64>, m: &Matrix<f64>, mode: usize) -> Vec<f64> {
    let mut out_dims = t.dims().to_vec();
    out_dims[mode] = m.rows();
    let mut out = vec![0.0; out_dims.iter().product()];
    for idx in multi_indices(&out_dims) {
        let mut acc = 0.0;
        for i in 0..t.dims()[mode] {
            let mut src = idx.clone();
            src[mode] = i;
            acc += t.data()[offset(t.dims(), &src)] * m[(idx[mode], i)];
        }
        out[offset(&out_dims, &idx)] = acc;
    }
    out
}

/// `<B, X>` over the trailing modes of `b`, by explicit loops.
pub fn inner_oracle(b: &DenseTensor<f64>, x: &DenseTensor<f64>) -> Vec<f64> {
    let m = b.order() - x.order();
    let lead = &b.dims()[..m];
    multi_indices(lead)
        .iter()
        .map(|i| {
            multi_indices(x.dims())
                .iter()
                .map(|j| {
                    let full: Vec<usize> = i.iter().chain(j).copied().collect();
                    b.data()[offset(b.dims(), &full)] * x.data()[offset(x.dims(), j)]
                })
                .sum()
        })
        .collect()
}

/// Dense `sum_r w_r b_{r,1} o ... o b_{r,K}` entry by entry.
pub fn reconstruct_oracle(c: &CpTensor<f64>) -> DenseTensor<f64> {
    let dims = c.dims().to_vec();
    let data = multi_indices(&dims)
        .iter()
        .map(|idx| {
            (0..c.rank())
                .map(|r| {
                    c.weights()[r]
                        * idx.iter().enumerate().map(|(d, &i)| c.factor(d)[(i, r)]).product::<f64>()
                })
                .sum()
        })
        .collect();
    DenseTensor::new(dims, data).unwrap()
}

/// Factor processes `f_r = <X, b_{r,m+1} o ... o b_{r,N}>` by explicit loops.
pub fn factor_oracle(c: &CpTensor<f64>, m: usize, x: &DenseTensor<f64>) -> Vec<f64> {
    (0..c.rank())
        .map(|r| {
            multi_indices(x.dims())
                .iter()
                .map(|j| {
                    x.data()[offset(x.dims(), j)]
                        * j.iter().enumerate().map(|(d, &i)| c.factor(m + d)[(i, r)]).product::<f64>()
                })
                .sum()
        })
        .collect()
}

/// Companion matrix of a TAR(L) coefficient built from the dense tensor:
/// top block entry `(i, l * p_y + j) = B[i, j, l]`, identity below.
pub fn companion_oracle(c: &CpTensor<f64>, resp_dims: &[usize], lags: usize) -> Vec<Vec<f64>> {
    let dense = reconstruct_oracle(c);
    let py: usize = resp_dims.iter().product();
    let n = py * lags;
    let mut out = vec![vec![0.0; n]; n];
    for i in multi_indices(resp_dims) {
        for j in multi_indices(resp_dims) {
            for l in 0..lags {
                let mut full: Vec<usize> = i.iter().chain(&j).copied().collect();
                if lags > 1 {
                    full.push(l);
                }
                out[offset(resp_dims, &i)][l * py + offset(resp_dims, &j)] = dense.data()[offset(dense.dims(), &full)];
            }
        }
    }
    for k in 0..py * (lags - 1) {
        out[py + k][k] = 1.0;
    }
    out
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len(), "length mismatch");
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Random regression sample of length `t` with `Y_t = <truth, X_t> + noise * E_t`.
pub fn planted_sample(
    rng: &mut ChaCha20Rng,
    split: &ModeSplit,
    truth: &CpTensor<f64>,
    t: usize,
    noise: f64,
) -> RegressionSample<f64> {
    let dense = reconstruct_oracle(truth);
    let mut ys = Vec::with_capacity(t);
    let mut xs = Vec::with_capacity(t);
    for _ in 0..t {
        let x = rand_tensor(rng, split.predictor_dims());
        let mut y = inner_oracle(&dense, &x);
        for v in y.iter_mut() {
            *v += noise * gauss(rng);
        }
        ys.push(DenseTensor::new(split.response_dims().to_vec(), y).unwrap());
        xs.push(x);
    }
    RegressionSample::new(split.clone(), ys, xs).unwrap()
}

/// `sum_t ||Y_t - <B, X_t>||^2` for the dense `B` of `c`, by explicit loops.
pub fn loss_oracle(c: &CpTensor<f64>, sample: &RegressionSample<f64>) -> f64 {
    let dense = reconstruct_oracle(c);
    sample
        .responses()
        .iter()
        .zip(sample.predictors())
        .map(|(y, x)| {
            let pred = inner_oracle(&dense, x);
            y.data().iter().zip(&pred).map(|(a, b)| (a - b).powi(2)).sum::<f64>()
        })
        .sum()
}
