//! Exact sampling of one-dimensional fractional Brownian motions.
//!
//! Samples are drawn on uniform grids from the exact Gaussian law of the
//! increments (fractional Gaussian noise) and accumulated, so the node values
//! have covariance `½(s^{2H} + t^{2H} − |s−t|^{2H})` up to round-off. The
//! Cholesky factor is the reference route; circulant embedding is a faster
//! route that agrees in distribution only.

use std::collections::HashMap;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::grr::constraint_audit;
use crate::rng;

/// Uniform grid `t_k = k T / n`, `k = 0..=n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    horizon: f64,
    n_steps: usize,
}

impl TimeGrid {
    pub fn new(horizon: f64, n_steps: usize) -> Result<Self> {
        if !(horizon.is_finite() && horizon > 0.0) {
            return domain(format!("horizon must be positive and finite, got {horizon}"));
        }
        if n_steps == 0 {
            return domain("time grid needs at least one step");
        }
        Ok(TimeGrid { horizon, n_steps })
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    pub fn n_nodes(&self) -> usize {
        self.n_steps + 1
    }

    pub fn dt(&self) -> f64 {
        self.horizon / self.n_steps as f64
    }

    pub fn node(&self, k: usize) -> f64 {
        self.horizon * k as f64 / self.n_steps as f64
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..=self.n_steps).map(|k| self.node(k)).collect()
    }

    /// Index of the node equal to `t` (within 1e-9 of a step).
    pub fn node_index(&self, t: f64) -> Result<usize> {
        let x = t / self.dt();
        let k = x.round();
        if (x - k).abs() > 1e-9 || k < 0.0 || k as usize > self.n_steps {
            return domain(format!("time {t} is not a node of the grid (T={}, n={})", self.horizon, self.n_steps));
        }
        Ok(k as usize)
    }

    /// Same horizon, `factor` times as many steps.
    pub fn refined(&self, factor: usize) -> TimeGrid {
        TimeGrid { horizon: self.horizon, n_steps: self.n_steps * factor.max(1) }
    }
}

/// Hurst exponents of the noise modes together with the regularity data
/// `gamma` (Hölder exponent of `h'`) and the fractional order `alpha`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HurstSequence {
    values: Vec<f64>,
    gamma: f64,
    alpha: f64,
    h_inf: f64,
}

impl HurstSequence {
    /// Validates every parameter window; see [`crate::grr::constraint_audit`].
    pub fn new(values: Vec<f64>, gamma: f64, alpha: f64) -> Result<Self> {
        let report = constraint_audit(&values, gamma, alpha);
        if !report.passes() {
            return Err(Error::Config(format!("Hurst constraints violated: {}", report.violations.join("; "))));
        }
        Ok(HurstSequence { h_inf: report.h_inf, values, gamma, alpha })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn h_inf(&self) -> f64 {
        self.h_inf
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// The canonical auxiliary exponent `ε = ½(H̲ − 1 + α)`.
    pub fn canonical_epsilon(&self) -> f64 {
        0.5 * (self.h_inf - 1.0 + self.alpha)
    }
}

/// One sampled trajectory on a uniform grid, starting at the origin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FbmPath {
    pub hurst: f64,
    pub grid: TimeGrid,
    pub values: Vec<f64>,
    pub seed: u64,
}

impl FbmPath {
    /// Increment over step `k`, i.e. `B(t_{k+1}) − B(t_k)`.
    pub fn increment(&self, k: usize) -> f64 {
        self.values[k + 1] - self.values[k]
    }

    pub fn increments(&self) -> Vec<f64> {
        self.values.windows(2).map(|w| w[1] - w[0]).collect()
    }

    /// Every `factor`-th node; the result lives on the coarser grid.
    pub fn subsample(&self, factor: usize) -> Result<FbmPath> {
        if factor == 0 || self.grid.n_steps() % factor != 0 {
            return domain(format!("cannot subsample {} steps by {factor}", self.grid.n_steps()));
        }
        Ok(FbmPath {
            hurst: self.hurst,
            grid: TimeGrid::new(self.grid.horizon(), self.grid.n_steps() / factor)?,
            values: self.values.iter().step_by(factor).copied().collect(),
            seed: self.seed,
        })
    }
}

/// `Cov(B^H(s), B^H(t)) = ½(s^{2H} + t^{2H} − |s−t|^{2H})`.
pub fn fbm_covariance(hurst: f64, s: f64, t: f64) -> Result<f64> {
    if !(hurst > 0.0 && hurst < 1.0) {
        return domain(format!("Hurst exponent must lie in (0,1), got {hurst}"));
    }
    if !(s >= 0.0 && t >= 0.0) {
        return domain(format!("times must be nonnegative, got s={s}, t={t}"));
    }
    let two_h = 2.0 * hurst;
    Ok(0.5 * (s.powf(two_h) + t.powf(two_h) - (s - t).abs().powf(two_h)))
}

/// Autocovariance of unit-spaced fractional Gaussian noise at lag `k`.
fn fgn_autocovariance(hurst: f64, k: usize) -> f64 {
    let two_h = 2.0 * hurst;
    let k = k as f64;
    0.5 * ((k + 1.0).powf(two_h) + (k - 1.0).abs().powf(two_h) - 2.0 * k.powf(two_h))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FbmMethod {
    #[default]
    Cholesky,
    CirculantEmbedding,
}

#[derive(Clone)]
enum Factor {
    Cholesky(DMatrix<f64>),
    Circulant { sqrt_eigs: Vec<f64>, fft: Arc<dyn rustfft::Fft<f64>> },
}

/// Reusable sampler for a fixed `(H, grid, method)`; the factorization is
/// computed once and shared by every sample.
#[derive(Clone)]
pub struct FbmSampler {
    hurst: f64,
    grid: TimeGrid,
    method: FbmMethod,
    factor: Factor,
}

impl std::fmt::Debug for FbmSampler {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FbmSampler")
            .field("hurst", &self.hurst)
            .field("grid", &self.grid)
            .field("method", &self.method)
            .finish()
    }
}

impl FbmSampler {
    pub fn new(hurst: f64, grid: TimeGrid, method: FbmMethod) -> Result<Self> {
        if !(hurst > 0.0 && hurst < 1.0) {
            return domain(format!("Hurst exponent must lie in (0,1), got {hurst}"));
        }
        let n = grid.n_steps();
        let factor = match method {
            FbmMethod::Cholesky => {
                let gamma: Vec<f64> = (0..n).map(|k| fgn_autocovariance(hurst, k)).collect();
                let cov = DMatrix::from_fn(n, n, |i, j| gamma[i.abs_diff(j)]);
                let chol = cov.cholesky().ok_or_else(|| {
                    Error::Factorization(format!("increment covariance not positive definite (H={hurst}, n={n})"))
                })?;
                Factor::Cholesky(chol.unpack())
            }
            FbmMethod::CirculantEmbedding => {
                let m = 2 * n;
                let mut row: Vec<Complex64> = Vec::with_capacity(m);
                for k in 0..=n {
                    row.push(Complex64::new(fgn_autocovariance(hurst, k), 0.0));
                }
                for k in (1..n).rev() {
                    row.push(Complex64::new(fgn_autocovariance(hurst, k), 0.0));
                }
                let fft = FftPlanner::new().plan_fft_forward(m);
                fft.process(&mut row);
                let mut sqrt_eigs = Vec::with_capacity(m);
                for (k, z) in row.iter().enumerate() {
                    let lam = z.re;
                    if lam < -1e-10 * row[0].re.abs().max(1.0) {
                        return Err(Error::Factorization(format!(
                            "circulant embedding has negative eigenvalue {lam:.3e} at index {k}"
                        )));
                    }
                    sqrt_eigs.push((lam.max(0.0) / m as f64).sqrt());
                }
                Factor::Circulant { sqrt_eigs, fft }
            }
        };
        Ok(FbmSampler { hurst, grid, method, factor })
    }

    pub fn hurst(&self) -> f64 {
        self.hurst
    }

    pub fn grid(&self) -> TimeGrid {
        self.grid
    }

    pub fn method(&self) -> FbmMethod {
        self.method
    }

    /// Draws one path; identical seeds give identical paths.
    pub fn sample(&self, seed: u64) -> FbmPath {
        let n = self.grid.n_steps();
        let mut rng = rng::rng(seed);
        let unit_increments: Vec<f64> = match &self.factor {
            Factor::Cholesky(l) => {
                let z = DVector::from_iterator(n, (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)));
                let x = l * z;
                x.iter().copied().collect()
            }
            Factor::Circulant { sqrt_eigs, fft } => {
                let mut w: Vec<Complex64> = sqrt_eigs
                    .iter()
                    .map(|&s| {
                        let a: f64 = rng.sample(StandardNormal);
                        let b: f64 = rng.sample(StandardNormal);
                        Complex64::new(s * a, s * b)
                    })
                    .collect();
                fft.process(&mut w);
                w.iter().take(n).map(|z| z.re).collect()
            }
        };
        let scale = self.grid.dt().powf(self.hurst);
        let mut values = Vec::with_capacity(n + 1);
        values.push(0.0);
        let mut acc = 0.0;
        for x in unit_increments {
            acc += scale * x;
            values.push(acc);
        }
        FbmPath { hurst: self.hurst, grid: self.grid, values, seed }
    }

    /// `count` independent paths with seeds `sub_seed(seed, k)`.
    pub fn sample_many(&self, count: usize, seed: u64) -> Vec<FbmPath> {
        (0..count)
            .into_par_iter()
            .map(|k| self.sample(rng::sub_seed(seed, k as u64)))
            .collect()
    }
}

/// One exact (Cholesky) sample.
pub fn sample_fbm(hurst: f64, grid: TimeGrid, seed: u64) -> Result<FbmPath> {
    Ok(FbmSampler::new(hurst, grid, FbmMethod::Cholesky)?.sample(seed))
}

/// Caches one sampler per distinct Hurst value.
#[derive(Debug, Default)]
pub struct SamplerCache {
    method: FbmMethod,
    samplers: HashMap<(u64, TimeGrid), Arc<FbmSampler>>,
}

impl SamplerCache {
    pub fn new(method: FbmMethod) -> Self {
        SamplerCache { method, samplers: HashMap::new() }
    }

    pub fn get(&mut self, hurst: f64, grid: TimeGrid) -> Result<Arc<FbmSampler>> {
        let key = (hurst.to_bits(), grid);
        if let Some(s) = self.samplers.get(&key) {
            return Ok(Arc::clone(s));
        }
        let s = Arc::new(FbmSampler::new(hurst, grid, self.method)?);
        self.samplers.insert(key, Arc::clone(&s));
        Ok(s)
    }
}

impl std::hash::Hash for TimeGrid {
    fn hash<H: std::hash::Hasher>(&self, state: &mut H) {
        self.horizon.to_bits().hash(state);
        self.n_steps.hash(state);
    }
}

impl Eq for TimeGrid {}

/// `count` mutually independent paths; path `i` has Hurst exponent
/// `hs.values()[i]` and seed `sub_seed(seed, i)`.
pub fn sample_fbm_family(hs: &HurstSequence, grid: TimeGrid, count: usize, seed: u64) -> Result<Vec<FbmPath>> {
    sample_fbm_family_with(hs, grid, count, seed, &mut SamplerCache::new(FbmMethod::Cholesky))
}

pub fn sample_fbm_family_with(
    hs: &HurstSequence,
    grid: TimeGrid,
    count: usize,
    seed: u64,
    cache: &mut SamplerCache,
) -> Result<Vec<FbmPath>> {
    if count == 0 {
        return domain("family needs at least one path");
    }
    if count > hs.len() {
        return domain(format!("requested {count} paths but the Hurst sequence has {} values", hs.len()));
    }
    let samplers = hs.values()[..count]
        .iter()
        .map(|&h| cache.get(h, grid))
        .collect::<Result<Vec<_>>>()?;
    Ok(samplers
        .par_iter()
        .enumerate()
        .map(|(i, s)| s.sample(rng::sub_seed(seed, i as u64)))
        .collect())
}
