//! Data-generating processes for the simulation designs.
//!
//! Two designs share one coefficient generator:
//! `regression` draws every predictor entry from its own stationary AR(1)
//! process, and `tar1` runs the TAR(1) recursion `Y_t = <B, Y_{t-1}> + E_t`.
//! Both use `p_d = q_d = p` and standard Gaussian innovations.
//!
//! Random numbers come from ChaCha20 (`rand_chacha`), a counter-based
//! generator, with Gaussians from the ziggurat sampler of `rand_distr`.
//! Coefficients use stream 0 of the seeded generator and the data use
//! stream 1, so supplying one's own coefficients leaves the noise unchanged.

use std::fmt;
use std::io::Write;
use std::path::Path;

use rand::seq::index::sample as sample_indices;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::cp::{cp_contract_predictor, CpTensor, ModeSplit};
use crate::error::{FormatError, SimError};
use crate::matrix::Matrix;
use crate::model::{tar_stationarity, RegressionSample, TarSpec};
use crate::scalar::Scalar;
use crate::tensor::{normalize, DenseTensor};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DgpKind {
    /// `Y_t = <B, X_t> + E_t` with entrywise AR(1) predictors.
    RegressionAr1,
    /// `Y_t = <B, Y_{t-1}> + E_t`.
    Tar1,
}

impl fmt::Display for DgpKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DgpKind::RegressionAr1 => "regression",
            DgpKind::Tar1 => "tar1",
        })
    }
}

impl std::str::FromStr for DgpKind {
    type Err = SimError;

    fn from_str(s: &str) -> Result<Self, SimError> {
        match s {
            "regression" => Ok(DgpKind::RegressionAr1),
            "tar1" => Ok(DgpKind::Tar1),
            other => Err(SimError::Config(format!("unknown DGP {other:?} (expected regression or tar1)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DgpConfig {
    pub kind: DgpKind,
    /// Common mode size `p`.
    pub p: usize,
    pub rank: usize,
    /// Uniform sparsity `s_0` of every loading; `None` gives dense loadings.
    pub sparsity: Option<usize>,
    pub t: usize,
    pub target_radius: f64,
    pub seed: u64,
    pub burn_in: usize,
    /// Number of response modes; the predictor has the same number of modes.
    pub response_order: usize,
}

impl DgpConfig {
    pub fn new(kind: DgpKind, p: usize, rank: usize, t: usize, seed: u64) -> Self {
        Self {
            kind,
            p,
            rank,
            sparsity: None,
            t,
            target_radius: 0.8,
            seed,
            burn_in: 200,
            response_order: 3,
        }
    }

    pub fn with_sparsity(mut self, s0: usize) -> Self {
        self.sparsity = Some(s0);
        self
    }

    pub fn split(&self) -> ModeSplit {
        let dims = vec![self.p; self.response_order];
        ModeSplit::new(dims.clone(), dims).expect("validated dims")
    }

    pub fn validate(&self) -> Result<(), SimError> {
        if self.p == 0 || self.rank == 0 || self.t == 0 || self.response_order == 0 {
            return Err(SimError::Config("p, rank, T and the mode count must be positive".into()));
        }
        if let Some(s) = self.sparsity {
            if s == 0 || s > self.p {
                return Err(SimError::Config(format!("s0 = {s} must lie in 1..={}", self.p)));
            }
        }
        if !(self.target_radius > 0.0 && self.target_radius < 1.0) {
            return Err(SimError::Config(format!(
                "target radius {} must lie in (0, 1)",
                self.target_radius
            )));
        }
        Ok(())
    }
}

/// Deterministic stream of standard normal draws.
#[derive(Debug, Clone)]
pub struct GaussianStream {
    rng: ChaCha20Rng,
}

impl GaussianStream {
    pub fn new(seed: u64) -> Self {
        Self::from_rng(ChaCha20Rng::seed_from_u64(seed))
    }

    fn from_rng(rng: ChaCha20Rng) -> Self {
        Self { rng }
    }

    pub fn next_value(&mut self) -> f64 {
        StandardNormal.sample(&mut self.rng)
    }

    fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        self.rng.random_range(lo..hi)
    }
}

impl Iterator for GaussianStream {
    type Item = f64;

    fn next(&mut self) -> Option<f64> {
        Some(self.next_value())
    }
}

/// Test and experiment hooks for [`simulate_with`].
#[derive(Debug, Clone)]
pub struct SimHooks<S> {
    /// Use these coefficients instead of generating them.
    pub coefficients: Option<CpTensor<S>>,
    /// Replace every innovation by zero.
    pub zero_innovations: bool,
    /// Start the TAR recursion at this `Y_0` and skip the burn-in.
    pub initial_state: Option<DenseTensor<S>>,
    /// Lower-triangular `L` with `vec(E_t) = L z_t`, i.e. covariance `L L^T`.
    pub innovation_factor: Option<Matrix<S>>,
}

impl<S> Default for SimHooks<S> {
    fn default() -> Self {
        Self {
            coefficients: None,
            zero_innovations: false,
            initial_state: None,
            innovation_factor: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SimulatedData<S> {
    /// `T` aligned pairs; for `tar1` the predictor of `Y_t` is `Y_{t-1}`.
    pub sample: RegressionSample<S>,
    pub coefficients: CpTensor<S>,
    /// `E_1..E_T`, as added to the responses.
    pub innovations: Vec<DenseTensor<S>>,
    /// `tar1` only: the full path `Y_0..Y_T`.
    pub series: Option<Vec<DenseTensor<S>>>,
    /// `regression` only: the AR(1) coefficient of every predictor entry.
    pub ar_coefficients: Option<DenseTensor<S>>,
}

impl<S: Scalar> SimulatedData<S> {
    /// The same design with innovations removed: `Y_t = <B, X_t>` exactly.
    pub fn noiseless_sample(&self) -> RegressionSample<S> {
        let split = self.sample.split().clone();
        let responses = self
            .sample
            .predictors()
            .iter()
            .map(|x| cp_contract_predictor(&self.coefficients, &split, x).expect("dims match").0)
            .collect();
        RegressionSample::new(split, responses, self.sample.predictors().to_vec()).expect("dims match")
    }
}

/// `0.6 + 0.2 (r-1)/(R-1)` for `r = 1..R` (`0.6` when `R = 1`).
pub fn weight_schedule(rank: usize) -> Vec<f64> {
    (0..rank)
        .map(|r| if rank > 1 { 0.6 + 0.2 * r as f64 / (rank - 1) as f64 } else { 0.6 })
        .collect()
}

fn draw_loading(g: &mut GaussianStream, p: usize, s0: Option<usize>) -> Vec<f64> {
    loop {
        let mut v = vec![0.0; p];
        match s0 {
            Some(s) => {
                for i in sample_indices(&mut g.rng, p, s).into_vec() {
                    v[i] = g.uniform(-1.0, 1.0);
                }
            }
            None => v.iter_mut().for_each(|x| *x = g.uniform(-1.0, 1.0)),
        }
        if let Ok(u) = normalize(&v) {
            return u;
        }
    }
}

const MAX_COEFFICIENT_DRAWS: usize = 10_000;

/// Draws loadings with `Unif(-1,1)` non-zero entries (on a uniformly random
/// support of size `s_0` when sparse), normalizes them, applies the weight
/// schedule and rescales the weights so that the TAR(1) companion matrix has
/// spectral radius `target_radius`.
///
/// Draws whose companion matrix is numerically nilpotent cannot be rescaled
/// and are redrawn.
pub fn generate_coefficients<S: Scalar>(config: &DgpConfig) -> Result<CpTensor<S>, SimError> {
    config.validate()?;
    let mut g = GaussianStream::new(config.seed);
    let split = config.split();
    let dims = split.dims();
    let spec = TarSpec::new(split.response_dims().to_vec(), 1)?;
    let schedule = weight_schedule(config.rank);
    for _ in 0..MAX_COEFFICIENT_DRAWS {
        let mut cols: Vec<Vec<f64>> = vec![Vec::new(); dims.len()];
        for _ in 0..config.rank {
            for (d, &p) in dims.iter().enumerate() {
                cols[d].extend(draw_loading(&mut g, p, config.sparsity));
            }
        }
        let factors: Vec<Matrix<f64>> = cols
            .into_iter()
            .zip(&dims)
            .map(|(c, &p)| Matrix::from_col_major(p, config.rank, c).expect("sized above"))
            .collect();
        let mut cp = CpTensor::new(schedule.clone(), factors)?;
        let rho = tar_stationarity(&cp, &spec, 1e-12)?.spectral_radius;
        if !(rho > 1e-8) {
            continue;
        }
        cp.scale_weights(config.target_radius / rho);
        return Ok(cast_cp(&cp));
    }
    Err(SimError::Config(format!(
        "no coefficient draw with a non-zero spectral radius in {MAX_COEFFICIENT_DRAWS} attempts"
    )))
}

fn cast_cp<S: Scalar>(c: &CpTensor<f64>) -> CpTensor<S> {
    let weights = c.weights().iter().map(|&w| S::lit(w)).collect();
    let factors = c
        .factors()
        .iter()
        .map(|f| {
            let data = f.as_slice().iter().map(|&v| S::lit(v)).collect();
            Matrix::from_col_major(f.rows(), f.cols(), data).expect("same shape")
        })
        .collect();
    CpTensor::from_loadings(weights, factors).expect("unit loadings")
}

pub fn simulate<S: Scalar>(config: &DgpConfig) -> Result<SimulatedData<S>, SimError> {
    simulate_with(config, &SimHooks::default())
}

pub fn simulate_with<S: Scalar>(config: &DgpConfig, hooks: &SimHooks<S>) -> Result<SimulatedData<S>, SimError> {
    config.validate()?;
    let split = config.split();
    let coefficients = match &hooks.coefficients {
        Some(c) => {
            if !c.conforms_to(&split) {
                return Err(SimError::Config(format!(
                    "supplied coefficients have dims {:?}, expected {:?}",
                    c.dims(),
                    split.dims()
                )));
            }
            c.clone()
        }
        None => generate_coefficients(config)?,
    };
    let p_y = split.response_len();
    if let Some(l) = &hooks.innovation_factor {
        if l.rows() != p_y || l.cols() != p_y {
            return Err(SimError::Config(format!(
                "innovation factor is {}x{}, expected {p_y}x{p_y}",
                l.rows(),
                l.cols()
            )));
        }
    }
    let mut rng = ChaCha20Rng::seed_from_u64(config.seed);
    rng.set_stream(1);
    let mut g = GaussianStream::from_rng(rng);
    let noise = |g: &mut GaussianStream| -> DenseTensor<S> {
        let z: Vec<S> = (0..p_y).map(|_| S::lit(g.next_value())).collect();
        let e = match &hooks.innovation_factor {
            Some(l) => l.matvec(&z).expect("checked shape"),
            None => z,
        };
        let e = if hooks.zero_innovations { vec![S::zero(); p_y] } else { e };
        DenseTensor::new(split.response_dims().to_vec(), e).expect("sized above")
    };
    match config.kind {
        DgpKind::Tar1 => {
            let spec = TarSpec::new(split.response_dims().to_vec(), 1)?;
            let radius = tar_stationarity(&coefficients, &spec, S::lit(1e-6))?.spectral_radius;
            if radius >= S::one() {
                return Err(SimError::NonStationary { radius: radius.as_f64() });
            }
            let step = |y: &DenseTensor<S>| cp_contract_predictor(&coefficients, &split, y).expect("dims match").0;
            let mut y = match &hooks.initial_state {
                Some(y0) => {
                    if y0.dims() != split.response_dims() {
                        return Err(SimError::Config(format!(
                            "initial state has dims {:?}, expected {:?}",
                            y0.dims(),
                            split.response_dims()
                        )));
                    }
                    y0.clone()
                }
                None => {
                    let mut y = DenseTensor::zeros(split.response_dims().to_vec())?;
                    for _ in 0..config.burn_in {
                        let mut next = step(&y);
                        next.add_scaled(S::one(), &noise(&mut g))?;
                        y = next;
                    }
                    y
                }
            };
            let mut series = vec![y.clone()];
            let mut innovations = Vec::with_capacity(config.t);
            for _ in 0..config.t {
                let e = noise(&mut g);
                let mut next = step(&y);
                next.add_scaled(S::one(), &e)?;
                innovations.push(e);
                series.push(next.clone());
                y = next;
            }
            let sample = RegressionSample::new(split.clone(), series[1..].to_vec(), series[..config.t].to_vec())?;
            Ok(SimulatedData {
                sample,
                coefficients,
                innovations,
                series: Some(series),
                ar_coefficients: None,
            })
        }
        DgpKind::RegressionAr1 => {
            let q_x = split.predictor_len();
            let alpha: Vec<f64> = (0..q_x)
                .map(|_| loop {
                    let a = g.uniform(-1.0, 1.0);
                    if a.abs() <= 0.999 {
                        break a;
                    }
                })
                .collect();
            let mut x = vec![0.0f64; q_x];
            let advance = |x: &mut Vec<f64>, g: &mut GaussianStream| {
                for (xi, a) in x.iter_mut().zip(&alpha) {
                    *xi = a * *xi + g.next_value();
                }
            };
            for _ in 0..config.burn_in {
                advance(&mut x, &mut g);
            }
            let pdims = split.predictor_dims().to_vec();
            let mut responses = Vec::with_capacity(config.t);
            let mut predictors = Vec::with_capacity(config.t);
            let mut innovations = Vec::with_capacity(config.t);
            for _ in 0..config.t {
                advance(&mut x, &mut g);
                let xt = DenseTensor::new(pdims.clone(), x.iter().map(|&v| S::lit(v)).collect())?;
                let e = noise(&mut g);
                let mut y = cp_contract_predictor(&coefficients, &split, &xt)?.0;
                y.add_scaled(S::one(), &e)?;
                responses.push(y);
                predictors.push(xt);
                innovations.push(e);
            }
            let ar = DenseTensor::new(pdims, alpha.iter().map(|&a| S::lit(a)).collect())?;
            Ok(SimulatedData {
                sample: RegressionSample::new(split, responses, predictors)?,
                coefficients,
                innovations,
                series: None,
                ar_coefficients: Some(ar),
            })
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReplicationRow {
    pub dgp: DgpKind,
    pub p: usize,
    pub rank: usize,
    pub s0: Option<usize>,
    pub t: usize,
    pub rep: usize,
    pub frob_error: f64,
}

/// Runs `reps` replications of `config` in parallel, replication `i` using
/// seed `config.seed + i`, and records `evaluate`'s error for each. Rows are
/// returned in replication order.
pub fn replicate<F, E>(config: &DgpConfig, reps: usize, evaluate: F) -> Result<Vec<ReplicationRow>, E>
where
    F: Fn(&DgpConfig) -> Result<f64, E> + Sync,
    E: Send,
{
    (0..reps)
        .into_par_iter()
        .map(|rep| {
            let mut cfg = config.clone();
            cfg.seed = config.seed.wrapping_add(rep as u64);
            Ok(ReplicationRow {
                dgp: config.kind,
                p: config.p,
                rank: config.rank,
                s0: config.sparsity,
                t: config.t,
                rep,
                frob_error: evaluate(&cfg)?,
            })
        })
        .collect()
}

/// Writes `dgp,p,R,s0,T,rep,frob_error` rows; a dense design has `s0 = none`.
pub fn write_replication_csv(path: &Path, rows: &[ReplicationRow]) -> Result<(), FormatError> {
    let io = |source| FormatError::Io {
        path: path.to_path_buf(),
        source,
    };
    let mut out = String::from("dgp,p,R,s0,T,rep,frob_error\n");
    for r in rows {
        let s0 = r.s0.map_or_else(|| "none".to_string(), |s| s.to_string());
        out.push_str(&format!("{},{},{},{},{},{},{:?}\n", r.dgp, r.p, r.rank, s0, r.t, r.rep, r.frob_error));
    }
    let mut f = std::fs::File::create(path).map_err(io)?;
    f.write_all(out.as_bytes()).map_err(io)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn schedule_matches_formula() {
        assert_eq!(weight_schedule(1), vec![0.6]);
        let w = weight_schedule(3);
        assert!((w[0] - 0.6).abs() < 1e-15 && (w[1] - 0.7).abs() < 1e-15 && (w[2] - 0.8).abs() < 1e-15);
    }

    #[test]
    fn dgp_names_round_trip() {
        for k in [DgpKind::RegressionAr1, DgpKind::Tar1] {
            assert_eq!(k.to_string().parse::<DgpKind>().unwrap(), k);
        }
        assert!("var".parse::<DgpKind>().is_err());
    }

    #[test]
    fn tar_sample_is_aligned() {
        let cfg = DgpConfig::new(DgpKind::Tar1, 2, 1, 5, 3);
        let data = simulate::<f64>(&cfg).unwrap();
        let series = data.series.unwrap();
        assert_eq!(series.len(), 6);
        for t in 0..5 {
            assert_eq!(data.sample.predictors()[t], series[t]);
            assert_eq!(data.sample.responses()[t], series[t + 1]);
        }
    }
}
