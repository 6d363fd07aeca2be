//! CP-format tensors `B = sum_r w_r b_{r,1} o ... o b_{r,N}` and the kernels
//! that evaluate them without materializing the dense coefficient tensor.

use crate::error::TensorError;
use crate::matrix::Matrix;
use crate::scalar::{axpy, dot, norm2, Scalar};
use crate::tensor::{outer_product, DenseTensor};

/// Split of an `N = m + n` mode coefficient tensor into `m` response modes
/// followed by `n` predictor modes.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ModeSplit {
    response_dims: Vec<usize>,
    predictor_dims: Vec<usize>,
}

impl ModeSplit {
    pub fn new(response_dims: Vec<usize>, predictor_dims: Vec<usize>) -> Result<Self, TensorError> {
        if response_dims.is_empty() || predictor_dims.is_empty() {
            return Err(TensorError::Argument(
                "a mode split needs at least one response and one predictor mode".into(),
            ));
        }
        if response_dims.iter().chain(&predictor_dims).any(|&p| p == 0) {
            return Err(TensorError::Argument("mode sizes must be positive".into()));
        }
        Ok(Self {
            response_dims,
            predictor_dims,
        })
    }

    pub fn m(&self) -> usize {
        self.response_dims.len()
    }

    pub fn n(&self) -> usize {
        self.predictor_dims.len()
    }

    pub fn order(&self) -> usize {
        self.m() + self.n()
    }

    pub fn response_dims(&self) -> &[usize] {
        &self.response_dims
    }

    pub fn predictor_dims(&self) -> &[usize] {
        &self.predictor_dims
    }

    /// `p_y`, the number of response entries.
    pub fn response_len(&self) -> usize {
        self.response_dims.iter().product()
    }

    /// `q_x`, the number of predictor entries.
    pub fn predictor_len(&self) -> usize {
        self.predictor_dims.iter().product()
    }

    /// Dims of a conforming coefficient tensor: response dims then predictor dims.
    pub fn dims(&self) -> Vec<usize> {
        let mut d = self.response_dims.clone();
        d.extend_from_slice(&self.predictor_dims);
        d
    }
}

/// Rank-`R` CP tensor with unit-norm loadings and non-negative weights.
///
/// `factors[d]` is the `p_d x R` loading matrix whose column `r` is `b_{r,d}`.
#[derive(Debug, Clone, PartialEq)]
pub struct CpTensor<S> {
    dims: Vec<usize>,
    weights: Vec<S>,
    factors: Vec<Matrix<S>>,
}

pub(crate) fn unit_tolerance<S: Scalar>() -> S {
    S::lit(1e-10).max(S::epsilon() * S::lit(100.0))
}

impl<S: Scalar> CpTensor<S> {
    /// Validates and wraps already-normalized factors.
    pub fn new(weights: Vec<S>, factors: Vec<Matrix<S>>) -> Result<Self, TensorError> {
        let rank = weights.len();
        if rank == 0 {
            return Err(TensorError::Argument("CP rank must be at least 1".into()));
        }
        if factors.is_empty() {
            return Err(TensorError::Argument("CP tensor needs at least one mode".into()));
        }
        if let Some(w) = weights.iter().find(|w| !w.is_finite() || **w < S::zero()) {
            return Err(TensorError::Argument(format!("weight {w} is not a finite non-negative number")));
        }
        let tol = unit_tolerance::<S>();
        for (d, f) in factors.iter().enumerate() {
            if f.cols() != rank || f.rows() == 0 {
                return Err(TensorError::Shape(format!(
                    "factor {d} is {}x{}, expected {} columns",
                    f.rows(),
                    f.cols(),
                    rank
                )));
            }
            for r in 0..rank {
                let n = norm2(f.column(r));
                if (n - S::one()).abs() > tol {
                    return Err(TensorError::Argument(format!(
                        "loading ({r}, {d}) has norm {n}, expected 1"
                    )));
                }
            }
        }
        let dims = factors.iter().map(Matrix::rows).collect();
        Ok(Self {
            dims,
            weights,
            factors,
        })
    }

    /// Builds a canonical CP tensor from arbitrary (non-zero) loading columns:
    /// column norms are absorbed into the weights, negative weights are
    /// repaired on mode 0 and components are sorted by descending weight.
    pub fn from_loadings(weights: Vec<S>, mut factors: Vec<Matrix<S>>) -> Result<Self, TensorError> {
        let mut weights = weights;
        for f in factors.iter_mut() {
            if f.cols() != weights.len() {
                return Err(TensorError::Shape(format!(
                    "factor has {} columns, expected {}",
                    f.cols(),
                    weights.len()
                )));
            }
            for (r, w) in weights.iter_mut().enumerate() {
                let col = f.column_mut(r);
                let n = norm2(col);
                if !(n > S::zero()) || !n.is_finite() {
                    return Err(TensorError::DegenerateDirection);
                }
                col.iter_mut().for_each(|v| *v /= n);
                *w *= n;
            }
        }
        let mut cp = Self::raw(weights, factors);
        cp.canonicalize();
        Self::new(cp.weights, cp.factors)
    }

    pub(crate) fn raw(weights: Vec<S>, factors: Vec<Matrix<S>>) -> Self {
        let dims = factors.iter().map(Matrix::rows).collect();
        Self {
            dims,
            weights,
            factors,
        }
    }

    /// Flips the sign of mode-0 loadings with negative weights and orders the
    /// components by descending weight (stable).
    pub fn canonicalize(&mut self) {
        for r in 0..self.rank() {
            if self.weights[r] < S::zero() {
                self.weights[r] = -self.weights[r];
                self.factors[0].column_mut(r).iter_mut().for_each(|v| *v = -*v);
            }
        }
        let mut order: Vec<usize> = (0..self.rank()).collect();
        order.sort_by(|&a, &b| {
            self.weights[b]
                .partial_cmp(&self.weights[a])
                .unwrap_or(std::cmp::Ordering::Equal)
        });
        if order.iter().enumerate().all(|(i, &o)| i == o) {
            return;
        }
        self.weights = order.iter().map(|&o| self.weights[o]).collect();
        for f in self.factors.iter_mut() {
            let mut g = Matrix::zeros(f.rows(), f.cols());
            for (new, &old) in order.iter().enumerate() {
                g.column_mut(new).copy_from_slice(f.column(old));
            }
            *f = g;
        }
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn order(&self) -> usize {
        self.dims.len()
    }

    pub fn rank(&self) -> usize {
        self.weights.len()
    }

    pub fn weights(&self) -> &[S] {
        &self.weights
    }

    pub fn factors(&self) -> &[Matrix<S>] {
        &self.factors
    }

    pub fn factor(&self, mode: usize) -> &Matrix<S> {
        &self.factors[mode]
    }

    /// Loading vector `b_{r,d}`.
    pub fn loading(&self, r: usize, d: usize) -> &[S] {
        self.factors[d].column(r)
    }

    /// Multiplies every weight by `c >= 0`.
    pub fn scale_weights(&mut self, c: S) {
        self.weights.iter_mut().for_each(|w| *w *= c);
    }

    pub fn conforms_to(&self, split: &ModeSplit) -> bool {
        self.dims == split.dims()
    }

    /// Materializes the dense tensor `sum_r w_r b_{r,1} o ... o b_{r,N}`.
    pub fn reconstruct(&self) -> DenseTensor<S> {
        let mut out = DenseTensor::zeros(self.dims.clone()).expect("CP dims are valid");
        for r in 0..self.rank() {
            out.add_scaled(self.weights[r], &self.component(r, 0..self.order()))
                .expect("component shares dims");
        }
        out
    }

    /// Unweighted rank-one tensor of component `r` restricted to `modes`.
    pub(crate) fn component(&self, r: usize, modes: std::ops::Range<usize>) -> DenseTensor<S> {
        let vecs: Vec<&[S]> = modes.map(|d| self.loading(r, d)).collect();
        outer_product(&vecs).expect("loadings are non-empty")
    }

    /// Frobenius inner product of two CP tensors via loading Gram products.
    pub fn inner(&self, other: &Self) -> Result<S, TensorError> {
        if self.dims != other.dims {
            return Err(TensorError::Shape(format!(
                "CP dims {:?} and {:?} differ",
                self.dims, other.dims
            )));
        }
        let mut total = S::zero();
        for r in 0..self.rank() {
            for q in 0..other.rank() {
                let mut prod = self.weights[r] * other.weights[q];
                for d in 0..self.order() {
                    prod *= dot(self.loading(r, d), other.loading(q, d));
                }
                total += prod;
            }
        }
        Ok(total)
    }

    pub fn frobenius_norm(&self) -> S {
        self.inner(self).expect("same dims").max(S::zero()).sqrt()
    }

    /// `||self - other||_F`, invariant to component permutation and sign.
    ///
    /// Uses the Gram expansion when it is numerically safe and falls back to
    /// dense reconstruction when cancellation dominates.
    pub fn distance(&self, other: &Self) -> Result<S, TensorError> {
        let aa = self.inner(self)?;
        let bb = other.inner(other)?;
        let ab = self.inner(other)?;
        let sq = aa + bb - S::lit(2.0) * ab;
        let size: usize = self.dims.iter().product();
        if sq < S::lit(1e-6) * (aa + bb) && size <= 4_000_000 {
            let mut diff = self.reconstruct();
            diff.add_scaled(-S::one(), &other.reconstruct())?;
            return Ok(diff.frobenius_norm());
        }
        Ok(sq.max(S::zero()).sqrt())
    }
}

/// Factor processes `f_r = X x_1 b_{r,m+1} ... x_n b_{r,m+n}` and the
/// prediction `sum_r w_r f_r b_{r,1} o ... o b_{r,m}`, computed without
/// forming the full coefficient tensor.
pub fn cp_contract_predictor<S: Scalar>(
    c: &CpTensor<S>,
    split: &ModeSplit,
    x: &DenseTensor<S>,
) -> Result<(DenseTensor<S>, Vec<S>), TensorError> {
    if !c.conforms_to(split) {
        return Err(TensorError::Shape(format!(
            "CP dims {:?} do not match split {:?}",
            c.dims(),
            split.dims()
        )));
    }
    if x.dims() != split.predictor_dims() {
        return Err(TensorError::Shape(format!(
            "predictor dims {:?}, expected {:?}",
            x.dims(),
            split.predictor_dims()
        )));
    }
    let m = split.m();
    let factors: Vec<S> = (0..c.rank())
        .map(|r| {
            let vecs: Vec<&[S]> = (m..c.order()).map(|d| c.loading(r, d)).collect();
            x.contract_all(&vecs)
        })
        .collect::<Result<_, _>>()?;
    let mut pred = vec![S::zero(); split.response_len()];
    for (r, &f) in factors.iter().enumerate() {
        let coef = c.weights()[r] * f;
        if coef != S::zero() {
            axpy(coef, c.component(r, 0..m).data(), &mut pred);
        }
    }
    Ok((DenseTensor::new(split.response_dims().to_vec(), pred)?, factors))
}

/// Interaction matrix `b_{r,d1} o b_{r,d2}` (unweighted).
pub fn interaction_matrix<S: Scalar>(
    c: &CpTensor<S>,
    r: usize,
    d1: usize,
    d2: usize,
) -> Result<Matrix<S>, TensorError> {
    if d1 == d2 {
        return Err(TensorError::Argument("interaction modes must differ".into()));
    }
    if r >= c.rank() || d1 >= c.order() || d2 >= c.order() {
        return Err(TensorError::Argument(format!(
            "component {r} / modes ({d1}, {d2}) out of range for rank {} order {}",
            c.rank(),
            c.order()
        )));
    }
    let a = c.loading(r, d1);
    let b = c.loading(r, d2);
    let mut m = Matrix::zeros(a.len(), b.len());
    for (j, &bj) in b.iter().enumerate() {
        for (i, &ai) in a.iter().enumerate() {
            m[(i, j)] = ai * bj;
        }
    }
    Ok(m)
}

/// Smallest factor-level discrepancy between two equally shaped CP tensors
/// over component permutations and per-mode sign flips:
/// `sum_r [ (w_r - w'_r)^2 + sum_d min ||b -+ b'||^2 ]`, square-rooted.
/// Intended for diagnostics at small rank (exhaustive over permutations).
pub fn aligned_factor_error<S: Scalar>(est: &CpTensor<S>, truth: &CpTensor<S>) -> Result<S, TensorError> {
    if est.dims() != truth.dims() || est.rank() != truth.rank() {
        return Err(TensorError::Shape("CP tensors differ in dims or rank".into()));
    }
    let rank = est.rank();
    let cost = |a: usize, b: usize| -> S {
        let mut c = (est.weights()[a] - truth.weights()[b]).powi(2);
        for d in 0..est.order() {
            let x = est.loading(a, d);
            let y = truth.loading(b, d);
            let plus: S = x.iter().zip(y).map(|(&u, &v)| (u - v).powi(2)).sum();
            let minus: S = x.iter().zip(y).map(|(&u, &v)| (u + v).powi(2)).sum();
            c += plus.min(minus);
        }
        c
    };
    let mut perm: Vec<usize> = (0..rank).collect();
    let mut best = S::infinity();
    permute(&mut perm, 0, &mut |p| {
        let total: S = p.iter().enumerate().map(|(a, &b)| cost(a, b)).sum();
        if total < best {
            best = total;
        }
    });
    Ok(best.sqrt())
}

fn permute(p: &mut Vec<usize>, k: usize, visit: &mut impl FnMut(&[usize])) {
    if k == p.len() {
        visit(p);
        return;
    }
    for i in k..p.len() {
        p.swap(k, i);
        permute(p, k + 1, visit);
        p.swap(k, i);
    }
}
