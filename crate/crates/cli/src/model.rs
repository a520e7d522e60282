//! Construction of grids, bases, noise and solver problems from a config.

use std::sync::Arc;

use hornspde::domain::{build_grid, HornGrid};
use hornspde::rng::{self, stream};
use hornspde::solver::Problem;
use hornspde::spectral::{build_basis, check_spectral_condition, sample_noise, SpectralBasis, SpectralReport, Verdict};
use hornspde::{HurstSequence, TimeGrid};

use crate::config::ExperimentConfig;
use crate::error::{CliError, CliResult};

/// Grid, basis and spectral verdict shared by every trajectory of a run.
#[derive(Debug, Clone)]
pub struct Setup {
    pub grid: Arc<HornGrid>,
    pub basis: Arc<SpectralBasis>,
    pub spectral: SpectralReport,
}

impl Setup {
    pub fn build(cfg: &ExperimentConfig) -> CliResult<Self> {
        Self::at_resolution(cfg, cfg.domain.resolution, cfg.basis.modes)
    }

    pub fn at_resolution(cfg: &ExperimentConfig, resolution: f64, modes: usize) -> CliResult<Self> {
        let d = &cfg.domain;
        let grid = Arc::new(build_grid(&d.curve, d.dimension, d.length, resolution)?);
        let basis = Arc::new(build_basis(&grid, modes, cfg.basis.decay_exponent)?);
        let spectral = check_spectral_condition(&basis);
        Ok(Setup { grid, basis, spectral })
    }

    /// Refuses to run unless the spectral condition passes or is overridden.
    pub fn gate(&self, cfg: &ExperimentConfig) -> CliResult<()> {
        if self.spectral.verdict != Verdict::Pass && !cfg.basis.override_spectral_condition {
            return Err(CliError::Config(format!(
                "spectral condition verdict is {:?} (partial sum {:.6}); set basis.override_spectral_condition to run anyway",
                self.spectral.verdict, self.spectral.partial_sum
            )));
        }
        Ok(())
    }
}

/// Noise seed of ensemble member `k`.
pub fn member_seed(seed: u64, k: usize) -> u64 {
    rng::sub_seed(rng::derive_seed(seed, &[stream::NOISE]), k as u64)
}

/// Initial-condition seed of ensemble member `k`.
pub fn initial_seed(seed: u64, k: usize) -> u64 {
    rng::sub_seed(rng::derive_seed(seed, &[stream::INITIAL]), k as u64)
}

/// The solver problem for ensemble member `k` on `setup`.
pub fn problem(cfg: &ExperimentConfig, setup: &Setup, hs: &HurstSequence, grid: TimeGrid, k: usize) -> CliResult<Problem> {
    let noise = sample_noise(Arc::clone(&setup.basis), hs, grid, member_seed(cfg.seed, k))?;
    let initial = cfg.initial.realize(&setup.grid, &setup.basis, initial_seed(cfg.seed, k))?;
    Ok(Problem {
        grid: Arc::clone(&setup.grid),
        coefficient: cfg.coefficient,
        nonlinearity: cfg.nonlinearity,
        initial,
        noise,
        tolerance: cfg.solver.tolerance,
    })
}

/// Rough peak memory of a solve, in MiB: dense eigen workspace plus the
/// stored trajectory.
pub fn memory_estimate_mb(n_nodes: usize, n_steps: usize) -> f64 {
    let n = n_nodes as f64;
    (4.0 * n * n + (n_steps as f64 + 1.0) * n * 2.0) * 8.0 / (1024.0 * 1024.0)
}
