//! Dense N-way tensors and the multilinear primitives built on them.
//!
//! Storage order is fixed: the first index varies fastest, so the flat data
//! vector is the column-major vectorization `vec(T)`. Under this convention
//! the multi-mode matricization that groups the first `m` modes into rows is a
//! zero-copy reinterpretation of the data, and
//! `vec(<B, X>) = matricize(B, m) * vec(X)` holds without any permutation.

use crate::error::TensorError;
use crate::matrix::Matrix;
use crate::scalar::{axpy, dot, norm2, Scalar};

#[derive(Debug, Clone, PartialEq)]
pub struct DenseTensor<S> {
    dims: Vec<usize>,
    data: Vec<S>,
}

fn check_dims(dims: &[usize]) -> Result<usize, TensorError> {
    if dims.is_empty() {
        return Err(TensorError::Shape("tensor needs at least one mode".into()));
    }
    if let Some(d) = dims.iter().position(|&p| p == 0) {
        return Err(TensorError::Shape(format!("mode {d} has size zero")));
    }
    Ok(dims.iter().product())
}

impl<S: Scalar> DenseTensor<S> {
    pub fn new(dims: Vec<usize>, data: Vec<S>) -> Result<Self, TensorError> {
        let len = check_dims(&dims)?;
        if len != data.len() {
            return Err(TensorError::Shape(format!(
                "dims {dims:?} need {len} values, got {}",
                data.len()
            )));
        }
        Ok(Self { dims, data })
    }

    pub fn zeros(dims: Vec<usize>) -> Result<Self, TensorError> {
        let len = check_dims(&dims)?;
        Ok(Self {
            dims,
            data: vec![S::zero(); len],
        })
    }

    /// Builds a tensor by evaluating `f` at every multi-index.
    pub fn from_fn(dims: Vec<usize>, mut f: impl FnMut(&[usize]) -> S) -> Result<Self, TensorError> {
        let len = check_dims(&dims)?;
        let mut data = Vec::with_capacity(len);
        let mut idx = vec![0usize; dims.len()];
        for _ in 0..len {
            data.push(f(&idx));
            advance(&mut idx, &dims);
        }
        Ok(Self { dims, data })
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn order(&self) -> usize {
        self.dims.len()
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// The vectorization `vec(T)` (first index fastest).
    pub fn data(&self) -> &[S] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [S] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<S> {
        self.data
    }

    pub fn offset(&self, idx: &[usize]) -> usize {
        debug_assert_eq!(idx.len(), self.dims.len());
        let mut off = 0;
        let mut stride = 1;
        for (&i, &p) in idx.iter().zip(&self.dims) {
            debug_assert!(i < p);
            off += i * stride;
            stride *= p;
        }
        off
    }

    pub fn get(&self, idx: &[usize]) -> S {
        self.data[self.offset(idx)]
    }

    pub fn set(&mut self, idx: &[usize], value: S) {
        let off = self.offset(idx);
        self.data[off] = value;
    }

    pub fn reshape(self, dims: Vec<usize>) -> Result<Self, TensorError> {
        Self::new(dims, self.data)
    }

    pub fn frobenius_norm(&self) -> S {
        norm2(&self.data)
    }

    /// Full inner product `sum_i a_i b_i` of two equally shaped tensors.
    pub fn inner(&self, other: &Self) -> Result<S, TensorError> {
        self.same_shape(other)?;
        Ok(dot(&self.data, &other.data))
    }

    /// `self += alpha * other`.
    pub fn add_scaled(&mut self, alpha: S, other: &Self) -> Result<(), TensorError> {
        self.same_shape(other)?;
        axpy(alpha, &other.data, &mut self.data);
        Ok(())
    }

    pub fn scale(&mut self, alpha: S) {
        self.data.iter_mut().for_each(|v| *v *= alpha);
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    fn same_shape(&self, other: &Self) -> Result<(), TensorError> {
        if self.dims != other.dims {
            return Err(TensorError::Shape(format!(
                "dims {:?} and {:?} differ",
                self.dims, other.dims
            )));
        }
        Ok(())
    }

    fn check_mode(&self, mode: usize) -> Result<(usize, usize, usize), TensorError> {
        if mode >= self.order() {
            return Err(TensorError::Argument(format!(
                "mode {mode} out of range for order-{} tensor",
                self.order()
            )));
        }
        let left = self.dims[..mode].iter().product();
        let right = self.dims[mode + 1..].iter().product();
        Ok((left, self.dims[mode], right))
    }

    /// Mode-`mode` product `T x_k M` with `M` of shape `q x dims[mode]`.
    pub fn mode_product(&self, mat: &Matrix<S>, mode: usize) -> Result<Self, TensorError> {
        let (left, pk, right) = self.check_mode(mode)?;
        if mat.cols() != pk {
            return Err(TensorError::Shape(format!(
                "matrix has {} columns but mode {mode} has size {pk}",
                mat.cols()
            )));
        }
        let q = mat.rows();
        let mut dims = self.dims.clone();
        dims[mode] = q;
        let mut out = vec![S::zero(); left * q * right];
        for r in 0..right {
            for i in 0..pk {
                let src = &self.data[left * (i + pk * r)..left * (i + 1 + pk * r)];
                for j in 0..q {
                    let y = mat[(j, i)];
                    if y == S::zero() {
                        continue;
                    }
                    let dst = &mut out[left * (j + q * r)..left * (j + 1 + q * r)];
                    axpy(y, src, dst);
                }
            }
        }
        Self::new(dims, out)
    }

    /// Mode-`mode` product with a vector; the contracted mode is dropped.
    /// Contracting the only mode of an order-1 tensor yields a `[1]` tensor.
    pub fn mode_contract(&self, v: &[S], mode: usize) -> Result<Self, TensorError> {
        let (left, pk, right) = self.check_mode(mode)?;
        if v.len() != pk {
            return Err(TensorError::Shape(format!(
                "vector of length {} cannot contract mode {mode} of size {pk}",
                v.len()
            )));
        }
        let mut out = vec![S::zero(); left * right];
        for r in 0..right {
            let dst = &mut out[left * r..left * (r + 1)];
            for (i, &vi) in v.iter().enumerate() {
                let src = &self.data[left * (i + pk * r)..left * (i + 1 + pk * r)];
                axpy(vi, src, dst);
            }
        }
        let mut dims = self.dims.clone();
        dims.remove(mode);
        if dims.is_empty() {
            dims.push(1);
        }
        Self::new(dims, out)
    }

    /// Contracts every mode except `keep` with the matching vector in `vecs`
    /// (the entry at `keep` is ignored), returning a vector of length
    /// `dims[keep]`.
    pub fn contract_except(&self, vecs: &[&[S]], keep: usize) -> Result<Vec<S>, TensorError> {
        self.check_vectors(vecs, Some(keep))?;
        Ok(contract_raw(&self.data, &self.dims, vecs, Some(keep)))
    }

    /// Contracts every mode with the matching vector: `T x_1 v_1 ... x_K v_K`.
    pub fn contract_all(&self, vecs: &[&[S]]) -> Result<S, TensorError> {
        self.check_vectors(vecs, None)?;
        Ok(contract_raw(&self.data, &self.dims, vecs, None)[0])
    }

    fn check_vectors(&self, vecs: &[&[S]], keep: Option<usize>) -> Result<(), TensorError> {
        if vecs.len() != self.order() {
            return Err(TensorError::Shape(format!(
                "{} vectors supplied for an order-{} tensor",
                vecs.len(),
                self.order()
            )));
        }
        if let Some(k) = keep {
            self.check_mode(k)?;
        }
        for (d, (v, &p)) in vecs.iter().zip(&self.dims).enumerate() {
            if Some(d) != keep && v.len() != p {
                return Err(TensorError::Shape(format!(
                    "vector for mode {d} has length {}, expected {p}",
                    v.len()
                )));
            }
        }
        Ok(())
    }
}

/// Contraction kernel on raw column-major data. Trailing modes are peeled off
/// first (contiguous blocks), then leading modes.
pub(crate) fn contract_raw<S: Scalar>(
    data: &[S],
    dims: &[usize],
    vecs: &[&[S]],
    keep: Option<usize>,
) -> Vec<S> {
    let k = dims.len();
    let stop = keep.map_or(0, |x| x + 1);
    let mut cur: Vec<S> = data.to_vec();
    let mut rest: usize = dims.iter().product();
    for d in (stop..k).rev() {
        let p = dims[d];
        rest /= p;
        let mut next = vec![S::zero(); rest];
        for (i, &vi) in vecs[d].iter().enumerate() {
            axpy(vi, &cur[rest * i..rest * (i + 1)], &mut next);
        }
        cur = next;
    }
    if let Some(keep) = keep {
        for d in 0..keep {
            let p = dims[d];
            let n = cur.len() / p;
            cur = (0..n).map(|j| dot(&cur[p * j..p * (j + 1)], vecs[d])).collect();
        }
    }
    cur
}

pub(crate) fn advance(idx: &mut [usize], dims: &[usize]) {
    for (i, &p) in idx.iter_mut().zip(dims) {
        *i += 1;
        if *i < p {
            return;
        }
        *i = 0;
    }
}

/// Outer product `v_1 o v_2 o ... o v_K`.
pub fn outer_product<S: Scalar>(vectors: &[&[S]]) -> Result<DenseTensor<S>, TensorError> {
    if vectors.is_empty() {
        return Err(TensorError::Argument("outer product of an empty list".into()));
    }
    if vectors.iter().any(|v| v.is_empty()) {
        return Err(TensorError::Argument("outer product of an empty vector".into()));
    }
    let dims: Vec<usize> = vectors.iter().map(|v| v.len()).collect();
    let mut data = vectors[0].to_vec();
    for v in &vectors[1..] {
        let mut next = Vec::with_capacity(data.len() * v.len());
        for &vi in v.iter() {
            next.extend(data.iter().map(|&a| a * vi));
        }
        data = next;
    }
    DenseTensor::new(dims, data)
}

/// Generalized inner product over the trailing modes of `b`:
/// `<B, X>_{i_1..i_m} = sum_j B_{i_1..i_m j_1..j_n} X_{j_1..j_n}`.
pub fn generalized_inner<S: Scalar>(
    b: &DenseTensor<S>,
    x: &DenseTensor<S>,
) -> Result<DenseTensor<S>, TensorError> {
    let n = x.order();
    if b.order() <= n || b.dims()[b.order() - n..] != *x.dims() {
        return Err(TensorError::Shape(format!(
            "trailing dims of {:?} do not match {:?}",
            b.dims(),
            x.dims()
        )));
    }
    let out_dims = b.dims()[..b.order() - n].to_vec();
    let rows: usize = out_dims.iter().product();
    let mut out = vec![S::zero(); rows];
    for (j, &xj) in x.data().iter().enumerate() {
        if xj != S::zero() {
            axpy(xj, &b.data()[rows * j..rows * (j + 1)], &mut out);
        }
    }
    DenseTensor::new(out_dims, out)
}

/// Multi-mode matricization grouping modes `0..split_at` into rows and the
/// remaining modes into columns.
pub fn matricize<S: Scalar>(t: &DenseTensor<S>, split_at: usize) -> Result<Matrix<S>, TensorError> {
    if split_at == 0 || split_at >= t.order() {
        return Err(TensorError::Argument(format!(
            "split {split_at} out of range for order-{} tensor",
            t.order()
        )));
    }
    let rows = t.dims()[..split_at].iter().product();
    let cols = t.dims()[split_at..].iter().product();
    Matrix::from_col_major(rows, cols, t.data().to_vec())
}

/// `v / ||v||_2`.
pub fn normalize<S: Scalar>(v: &[S]) -> Result<Vec<S>, TensorError> {
    let n = norm2(v);
    if !(n > S::zero()) || !n.is_finite() {
        return Err(TensorError::DegenerateDirection);
    }
    Ok(v.iter().map(|&x| x / n).collect())
}

/// Zeroes all but the `s` largest-magnitude entries. Ties keep the lower index.
pub fn truncate<S: Scalar>(v: &[S], s: usize) -> Vec<S> {
    if s >= v.len() {
        return v.to_vec();
    }
    let mut order: Vec<usize> = (0..v.len()).collect();
    // stable sort keeps lower indices first among equal magnitudes
    order.sort_by(|&a, &b| {
        v[b].abs()
            .partial_cmp(&v[a].abs())
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let mut out = vec![S::zero(); v.len()];
    for &i in &order[..s] {
        out[i] = v[i];
    }
    out
}
