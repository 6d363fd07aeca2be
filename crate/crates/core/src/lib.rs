//! CP low-rank tensor regression for time series.
//!
//! Fits `Y_t = <B, X_t> + E_t` where the coefficient tensor `B` has a
//! rank-`R` CP decomposition, optionally with entrywise sparse loadings, and
//! covers tensor autoregression (`X_t` built from lagged `Y`), the simulation
//! designs used to validate the estimator, a vectorized Lasso baseline, and
//! rolling-forecast evaluation.
//!
//! All numerics are generic over [`Scalar`] (`f32`/`f64`); the `f64` aliases
//! at the crate root are what the CLI and most callers use.

pub mod baseline;
pub mod cp;
pub mod error;
pub mod estimator;
pub mod evaluation;
pub mod format;
pub mod matrix;
pub mod model;
pub mod scalar;
pub mod simulation;
pub mod tensor;

pub use cp::{aligned_factor_error, cp_contract_predictor, interaction_matrix, CpTensor, ModeSplit};
pub use error::{BenchError, EvalError, FitError, FormatError, LassoError, ModelError, SimError, TensorError};
pub use matrix::Matrix;
pub use model::{
    companion_matrix, embed_lags, spectral_radius, tar_stationarity, RegressionSample,
    StationarityReport, TarSpec,
};
pub use scalar::Scalar;
pub use tensor::{generalized_inner, matricize, normalize, outer_product, truncate, DenseTensor};

pub type Tensor = DenseTensor<f64>;
pub type Cp = CpTensor<f64>;
pub type Mat = Matrix<f64>;
pub type Sample = RegressionSample<f64>;
pub type FitConfig = estimator::FitConfig<f64>;
pub type FitResult = estimator::FitResult<f64>;

pub type Tensor32 = DenseTensor<f32>;
pub type Cp32 = CpTensor<f32>;
pub type Sample32 = RegressionSample<f32>;
