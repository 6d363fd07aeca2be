//! Model specifications: aligned regression samples, the TAR(L) lag
//! embedding, companion matrices and the stationarity check.

use crate::cp::{CpTensor, ModeSplit};
use crate::error::{ModelError, TensorError};
use crate::matrix::Matrix;
use crate::scalar::{dot, Scalar};
use crate::tensor::DenseTensor;

/// Aligned series `(Y_t, X_t)`, `t = 1..T`.
#[derive(Debug, Clone, PartialEq)]
pub struct RegressionSample<S> {
    split: ModeSplit,
    responses: Vec<DenseTensor<S>>,
    predictors: Vec<DenseTensor<S>>,
}

impl<S: Scalar> RegressionSample<S> {
    pub fn new(
        split: ModeSplit,
        responses: Vec<DenseTensor<S>>,
        predictors: Vec<DenseTensor<S>>,
    ) -> Result<Self, ModelError> {
        if responses.is_empty() {
            return Err(ModelError::InsufficientData { needed: 1, got: 0 });
        }
        if responses.len() != predictors.len() {
            return Err(ModelError::Argument(format!(
                "{} responses but {} predictors",
                responses.len(),
                predictors.len()
            )));
        }
        for (t, (y, x)) in responses.iter().zip(&predictors).enumerate() {
            if y.dims() != split.response_dims() {
                return Err(TensorError::Shape(format!(
                    "response {t} has dims {:?}, expected {:?}",
                    y.dims(),
                    split.response_dims()
                ))
                .into());
            }
            if x.dims() != split.predictor_dims() {
                return Err(TensorError::Shape(format!(
                    "predictor {t} has dims {:?}, expected {:?}",
                    x.dims(),
                    split.predictor_dims()
                ))
                .into());
            }
        }
        Ok(Self {
            split,
            responses,
            predictors,
        })
    }

    pub fn split(&self) -> &ModeSplit {
        &self.split
    }

    pub fn len(&self) -> usize {
        self.responses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.responses.is_empty()
    }

    pub fn responses(&self) -> &[DenseTensor<S>] {
        &self.responses
    }

    pub fn predictors(&self) -> &[DenseTensor<S>] {
        &self.predictors
    }

    /// Sub-sample over a contiguous time range.
    pub fn window(&self, range: std::ops::Range<usize>) -> Result<Self, ModelError> {
        if range.end > self.len() || range.start >= range.end {
            return Err(ModelError::Argument(format!(
                "window {range:?} invalid for sample of length {}",
                self.len()
            )));
        }
        Ok(Self {
            split: self.split.clone(),
            responses: self.responses[range.clone()].to_vec(),
            predictors: self.predictors[range].to_vec(),
        })
    }

    pub fn is_finite(&self) -> bool {
        self.responses.iter().chain(&self.predictors).all(DenseTensor::is_finite)
    }
}

/// TAR(L) specification for an `m`-th order response series.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TarSpec {
    response_dims: Vec<usize>,
    lag_order: usize,
}

impl TarSpec {
    pub fn new(response_dims: Vec<usize>, lag_order: usize) -> Result<Self, ModelError> {
        if lag_order == 0 {
            return Err(ModelError::Argument("lag order must be at least 1".into()));
        }
        ModeSplit::new(response_dims.clone(), response_dims.clone())?;
        Ok(Self {
            response_dims,
            lag_order,
        })
    }

    pub fn response_dims(&self) -> &[usize] {
        &self.response_dims
    }

    pub fn lag_order(&self) -> usize {
        self.lag_order
    }

    /// Predictor dims equal the response dims for L = 1 (the lag mode is
    /// collapsed) and gain a trailing lag mode of size L otherwise.
    pub fn split(&self) -> ModeSplit {
        let mut pred = self.response_dims.clone();
        if self.lag_order > 1 {
            pred.push(self.lag_order);
        }
        ModeSplit::new(self.response_dims.clone(), pred).expect("validated in TarSpec::new")
    }
}

/// Lagged predictor `X` with `X[.., l] = series[t - 1 - l]`, for forecasting
/// `series[t]` (`t` may equal `series.len()`).
pub fn lag_tensor<S: Scalar>(
    series: &[DenseTensor<S>],
    spec: &TarSpec,
    t: usize,
) -> Result<DenseTensor<S>, ModelError> {
    let lags = spec.lag_order;
    if t < lags || t > series.len() {
        return Err(ModelError::InsufficientData {
            needed: lags + 1,
            got: t,
        });
    }
    if lags == 1 {
        return Ok(series[t - 1].clone());
    }
    let mut data = Vec::with_capacity(series[0].len() * lags);
    for l in 1..=lags {
        data.extend_from_slice(series[t - l].data());
    }
    Ok(DenseTensor::new(spec.split().predictor_dims().to_vec(), data)?)
}

/// Pairs each `Y_t` (t >= L) with its stacked lags.
pub fn embed_lags<S: Scalar>(
    series: &[DenseTensor<S>],
    spec: &TarSpec,
) -> Result<RegressionSample<S>, ModelError> {
    let lags = spec.lag_order;
    if series.len() <= lags {
        return Err(ModelError::InsufficientData {
            needed: lags + 1,
            got: series.len(),
        });
    }
    if let Some((t, y)) = series.iter().enumerate().find(|(_, y)| y.dims() != spec.response_dims()) {
        return Err(TensorError::Shape(format!(
            "series element {t} has dims {:?}, expected {:?}",
            y.dims(),
            spec.response_dims()
        ))
        .into());
    }
    let mut responses = Vec::with_capacity(series.len() - lags);
    let mut predictors = Vec::with_capacity(series.len() - lags);
    for t in lags..series.len() {
        responses.push(series[t].clone());
        predictors.push(lag_tensor(series, spec, t)?);
    }
    RegressionSample::new(spec.split(), responses, predictors)
}

/// Companion matrix of a TAR(L) coefficient tensor. The top block row is
/// `(B_(1), ..., B_(L))`, the lag-wise `p_y x p_y` matricizations; for L = 1
/// the result is `B_(1)` itself.
pub fn companion_matrix<S: Scalar>(c: &CpTensor<S>, spec: &TarSpec) -> Result<Matrix<S>, ModelError> {
    let split = spec.split();
    if !c.conforms_to(&split) {
        return Err(ModelError::Argument(format!(
            "CP dims {:?} do not match TAR dims {:?}",
            c.dims(),
            split.dims()
        )));
    }
    let m = split.m();
    let py = split.response_len();
    let lags = spec.lag_order;
    let size = py * lags;
    let mut out = Matrix::zeros(size, size);
    for r in 0..c.rank() {
        let a = c.component(r, 0..m);
        let b = c.component(r, m..c.order());
        let w = c.weights()[r];
        for (j, &bj) in b.data().iter().enumerate() {
            let coef = w * bj;
            if coef == S::zero() {
                continue;
            }
            let col = &mut out.column_mut(j)[..py];
            crate::scalar::axpy(coef, a.data(), col);
        }
    }
    for i in 0..py * (lags - 1) {
        out[(py + i, i)] = S::one();
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StationarityReport<S> {
    pub spectral_radius: S,
    pub is_stationary: bool,
    pub method_iterations: usize,
}

impl<S: Scalar> StationarityReport<S> {
    fn new(spectral_radius: S, method_iterations: usize) -> Self {
        Self {
            spectral_radius,
            is_stationary: spectral_radius < S::one(),
            method_iterations,
        }
    }
}

pub const DEFAULT_RADIUS_TOL: f64 = 1e-3;
const MAX_SQUARINGS: usize = 40;

/// Spectral radius by Gelfand's formula, `rho = lim ||M^(2^j)||_F^(1/2^j)`,
/// evaluated with repeated squaring and per-step renormalization so that the
/// powers neither overflow nor underflow. Stops once successive estimates
/// differ by less than `tol` relative to the current estimate, or after 40
/// squarings.
pub fn spectral_radius<S: Scalar>(mat: &Matrix<S>, tol: S) -> Result<StationarityReport<S>, ModelError> {
    if !mat.is_square() {
        return Err(ModelError::Argument(format!(
            "spectral radius needs a square matrix, got {}x{}",
            mat.rows(),
            mat.cols()
        )));
    }
    if !(tol > S::zero()) {
        return Err(ModelError::Argument("tolerance must be positive".into()));
    }
    let norm0 = mat.frobenius_norm();
    if norm0 == S::zero() {
        return Ok(StationarityReport::new(S::zero(), 0));
    }
    let mut q = mat.clone();
    q.scale(S::one() / norm0);
    let mut log_norm = norm0.as_f64().ln();
    let mut estimate = norm0;
    for j in 1..=MAX_SQUARINGS {
        let mut p = q.matmul(&q)?;
        let s = p.frobenius_norm();
        if s == S::zero() {
            return Ok(StationarityReport::new(S::zero(), j));
        }
        p.scale(S::one() / s);
        q = p;
        log_norm = 2.0 * log_norm + s.as_f64().ln();
        let next = S::lit((log_norm / 2f64.powi(j as i32)).exp());
        let done = (next - estimate).abs() < tol * next;
        estimate = next;
        if done {
            return Ok(StationarityReport::new(estimate, j));
        }
    }
    Ok(StationarityReport::new(estimate, MAX_SQUARINGS))
}

/// Stationarity of a TAR(L) coefficient tensor.
///
/// For L = 1 the companion matrix `sum_r w_r a_r b_r^T` has rank at most R
/// and shares its non-zero spectrum with the `R x R` matrix
/// `K[r, s] = w_r <b_r, a_s>`, so the radius is computed on `K`. For L > 1
/// the dense companion matrix is used.
pub fn tar_stationarity<S: Scalar>(
    c: &CpTensor<S>,
    spec: &TarSpec,
    tol: S,
) -> Result<StationarityReport<S>, ModelError> {
    if spec.lag_order > 1 {
        return spectral_radius(&companion_matrix(c, spec)?, tol);
    }
    let split = spec.split();
    if !c.conforms_to(&split) {
        return Err(ModelError::Argument(format!(
            "CP dims {:?} do not match TAR dims {:?}",
            c.dims(),
            split.dims()
        )));
    }
    let m = split.m();
    let rank = c.rank();
    let mut k = Matrix::zeros(rank, rank);
    for r in 0..rank {
        for s in 0..rank {
            let mut v = c.weights()[r];
            for d in 0..m {
                v *= dot(c.loading(r, m + d), c.loading(s, d));
            }
            k[(r, s)] = v;
        }
    }
    spectral_radius(&k, tol)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar(v: f64) -> DenseTensor<f64> {
        DenseTensor::new(vec![1], vec![v]).unwrap()
    }

    #[test]
    fn embed_scalar_series_lag_one() {
        let series: Vec<_> = [1.0, 2.0, 3.0, 4.0].into_iter().map(scalar).collect();
        let spec = TarSpec::new(vec![1], 1).unwrap();
        let sample = embed_lags(&series, &spec).unwrap();
        let pairs: Vec<(f64, f64)> = sample
            .responses()
            .iter()
            .zip(sample.predictors())
            .map(|(y, x)| (y.data()[0], x.data()[0]))
            .collect();
        assert_eq!(pairs, vec![(2.0, 1.0), (3.0, 2.0), (4.0, 3.0)]);
    }

    #[test]
    fn embed_lag_two_on_matrix_series() {
        let series: Vec<_> = (0..5)
            .map(|t| DenseTensor::from_fn(vec![2, 2], |i| (t * 10 + i[0] + 2 * i[1]) as f64).unwrap())
            .collect();
        let spec = TarSpec::new(vec![2, 2], 2).unwrap();
        let sample = embed_lags(&series, &spec).unwrap();
        assert_eq!(sample.len(), 3);
        assert_eq!(sample.split().predictor_dims(), &[2, 2, 2]);
        for (k, x) in sample.predictors().iter().enumerate() {
            let t = k + 2;
            let lag1 = x.mode_contract(&[1.0, 0.0], 2).unwrap();
            let lag2 = x.mode_contract(&[0.0, 1.0], 2).unwrap();
            assert_eq!(lag1, series[t - 1]);
            assert_eq!(lag2, series[t - 2]);
        }
    }

    #[test]
    fn embed_rejects_short_series() {
        let series = vec![scalar(1.0), scalar(2.0)];
        let spec = TarSpec::new(vec![1], 2).unwrap();
        assert_eq!(
            embed_lags(&series, &spec),
            Err(ModelError::InsufficientData { needed: 3, got: 2 })
        );
    }

    #[test]
    fn radius_of_diagonal() {
        let m = Matrix::from_rows(&[vec![0.5, 0.0], vec![0.0, -0.9]]).unwrap();
        let rep = spectral_radius::<f64>(&m, 1e-3).unwrap();
        assert!((rep.spectral_radius - 0.9).abs() < 1e-3);
        assert!(rep.is_stationary);
    }

    #[test]
    fn radius_of_rotation() {
        let m = Matrix::from_rows(&[vec![0.0, -1.0], vec![1.0, 0.0]]).unwrap();
        let rep = spectral_radius::<f64>(&m, 1e-3).unwrap();
        assert!((rep.spectral_radius - 1.0).abs() < 1e-3);
        assert!(!rep.is_stationary);
    }

    #[test]
    fn radius_rejects_non_square() {
        assert!(spectral_radius(&Matrix::<f64>::zeros(2, 3), 1e-3).is_err());
        assert!(spectral_radius(&Matrix::<f64>::zeros(2, 2), 0.0).is_err());
    }

    #[test]
    fn radius_survives_huge_and_tiny_scales() {
        for scale in [1e-200, 1e200] {
            let m = Matrix::from_rows(&[vec![0.0, 2.0 * scale], vec![0.5 * scale, 0.3 * scale]]).unwrap();
            let rep = spectral_radius(&m, 1e-9).unwrap();
            let exact = scale * (0.15 + (0.0225f64 + 1.0).sqrt());
            assert!(((rep.spectral_radius - exact) / exact).abs() < 1e-6, "{scale}: {rep:?}");
        }
    }
}
