use std::path::{Path, PathBuf};

use hornspde::calibration::HURST_SWEEP;
use hornspde::domain::BoundaryCurve;
use hornspde::solver::{CoefficientField, InitialCondition, NonlinearitySpec, ScalarFunction};
use hornspde::{constraint_audit, ConstraintReport, HurstSequence, TimeGrid};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CliError, CliResult};

pub const SCHEMA_VERSION: u32 = 1;

/// Top-level experiment description, read from TOML.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    pub seed: u64,
    pub domain: DomainConfig,
    pub hurst: HurstConfig,
    pub basis: BasisConfig,
    pub time: TimeConfig,
    #[serde(default)]
    pub coefficient: CoefficientField,
    #[serde(default)]
    pub nonlinearity: NonlinearitySpec,
    pub initial: InitialCondition,
    #[serde(default)]
    pub ensemble: EnsembleConfig,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub output: OutputConfig,
    #[serde(default)]
    pub verify: VerifyConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainConfig {
    pub curve: BoundaryCurve,
    pub dimension: usize,
    pub length: f64,
    pub resolution: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HurstConfig {
    /// One exponent per noise mode.
    pub values: Vec<f64>,
    pub gamma: f64,
    pub alpha: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BasisConfig {
    pub modes: usize,
    pub decay_exponent: f64,
    /// Run even when the spectral condition does not pass.
    #[serde(default)]
    pub override_spectral_condition: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeConfig {
    pub horizon: f64,
    pub n_steps: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnsembleConfig {
    pub size: usize,
}

impl Default for EnsembleConfig {
    fn default() -> Self {
        EnsembleConfig { size: 1 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    pub tolerance: f64,
    pub fixed_point_tolerance: f64,
    /// Refusal threshold for `convergence`, in MiB.
    pub memory_cap_mb: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig { tolerance: 1e-10, fixed_point_tolerance: 1e-10, memory_cap_mb: 1024.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: PathBuf,
    /// Also write full nodal fields in the binary column format.
    pub snapshots: bool,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig { dir: PathBuf::from("out"), snapshots: false }
    }
}

/// Sizes of the verification suites.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VerifyConfig {
    pub hurst_sweep: Vec<f64>,
    /// Hurst values of the covariance-law check.
    pub law_hursts: Vec<f64>,
    pub law_samples: usize,
    pub law_steps: usize,
    /// Paths per Hurst value for GRR, increment and moment checks.
    pub paths: usize,
    /// Integrand/integrator pairs for the domination check.
    pub pairs: usize,
    pub pair_steps: usize,
    pub chain_steps: usize,
    pub chain_paths: usize,
    pub holder_steps: usize,
    pub holder_trajectories: usize,
    pub embedding_members: usize,
    pub embedding_steps: usize,
    pub residual_levels: usize,
    /// Mesh resolution and step count of the coarsest residual level.
    pub residual_resolution: f64,
    pub residual_steps: usize,
    pub residual_modes: usize,
    pub uniqueness_levels: usize,
    pub uniqueness_steps: usize,
    pub uniqueness_modes: usize,
    /// Reaction term shared by every uniqueness case.
    pub uniqueness_g: ScalarFunction,
    pub spectral_modes: usize,
    pub spectral_resolutions: Vec<f64>,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        VerifyConfig {
            hurst_sweep: HURST_SWEEP.to_vec(),
            law_hursts: vec![0.55, 0.75, 0.95],
            law_samples: 10_000,
            law_steps: 128,
            paths: 1000,
            pairs: 1000,
            pair_steps: 128,
            chain_steps: 1024,
            chain_paths: 1000,
            holder_steps: 512,
            holder_trajectories: 32,
            embedding_members: 100,
            embedding_steps: 32,
            residual_levels: 3,
            residual_resolution: 0.4,
            residual_steps: 2,
            residual_modes: 6,
            uniqueness_levels: 4,
            uniqueness_steps: 8,
            uniqueness_modes: 6,
            uniqueness_g: ScalarFunction::Affine { slope: 1.0, offset: 0.0 },
            spectral_modes: 32,
            spectral_resolutions: vec![0.1, 0.05, 0.025],
        }
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn from_toml(text: &str) -> CliResult<Self> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        if cfg.schema_version != SCHEMA_VERSION {
            return Err(CliError::Config(format!(
                "schema_version {} is not supported (expected {SCHEMA_VERSION})",
                cfg.schema_version
            )));
        }
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// SHA-256 of the canonical JSON rendering.
    pub fn fingerprint(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        hex::encode(Sha256::digest(json.as_bytes()))
    }

    pub fn time_grid(&self) -> CliResult<TimeGrid> {
        Ok(TimeGrid::new(self.time.horizon, self.time.n_steps)?)
    }

    pub fn audit(&self) -> ConstraintReport {
        constraint_audit(&self.hurst.values, self.hurst.gamma, self.hurst.alpha)
    }

    pub fn hurst_sequence(&self) -> CliResult<HurstSequence> {
        Ok(HurstSequence::new(self.hurst.values.clone(), self.hurst.gamma, self.hurst.alpha)?)
    }

    /// Checks everything that can be checked without building the grid.
    pub fn validate(&self) -> CliResult<()> {
        let audit = self.audit();
        if !audit.passes() {
            return Err(CliError::Constraint(Box::new(audit)));
        }
        let mut problems = Vec::new();
        if self.hurst.values.len() < self.basis.modes {
            problems.push(format!(
                "{} noise modes need {} Hurst values, got {}",
                self.basis.modes,
                self.basis.modes,
                self.hurst.values.len()
            ));
        }
        for (name, k) in [("verify.residual_modes", self.verify.residual_modes), ("verify.uniqueness_modes", self.verify.uniqueness_modes)] {
            if k == 0 || k > self.hurst.values.len() {
                problems.push(format!("{name} = {k} must lie in 1..={}", self.hurst.values.len()));
            }
        }
        if self.basis.modes == 0 {
            problems.push("basis.modes must be at least 1".into());
        }
        if !(self.basis.decay_exponent > 1.0) {
            problems.push(format!("basis.decay_exponent must exceed 1, got {}", self.basis.decay_exponent));
        }
        if !matches!(self.domain.dimension, 2 | 3) {
            problems.push(format!("domain.dimension must be 2 or 3, got {}", self.domain.dimension));
        }
        if self.ensemble.size == 0 {
            problems.push("ensemble.size must be at least 1".into());
        }
        if let Err(e) = self.time_grid() {
            problems.push(e.to_string());
        }
        if let Err(e) = self.coefficient.validate(self.domain.dimension) {
            problems.push(e.to_string());
        }
        if let Err(e) = self.nonlinearity.verify(10.0) {
            problems.push(e.to_string());
        }
        if !(self.solver.tolerance > 0.0 && self.solver.tolerance < 1e-6) {
            problems.push(format!("solver.tolerance must lie in (0, 1e-6), got {}", self.solver.tolerance));
        }
        if !(self.solver.memory_cap_mb > 0.0) {
            problems.push("solver.memory_cap_mb must be positive".into());
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(CliError::Config(problems.join("; ")))
        }
    }

    /// A small two-dimensional configuration that satisfies every gate.
    pub fn example() -> Self {
        ExperimentConfig {
            schema_version: SCHEMA_VERSION,
            seed: 42,
            domain: DomainConfig { curve: BoundaryCurve::gaussian(), dimension: 2, length: 3.0, resolution: 0.1 },
            hurst: HurstConfig {
                values: (0..12).map(|i| 0.55 + 0.4 * i as f64 / 11.0).map(|h| (h * 1e4).round() / 1e4).collect(),
                gamma: 1.0,
                alpha: 0.475,
            },
            basis: BasisConfig { modes: 12, decay_exponent: 4.0, override_spectral_condition: false },
            time: TimeConfig { horizon: 1.0, n_steps: 64 },
            coefficient: CoefficientField::Isotropic { value: 1.0 },
            nonlinearity: NonlinearitySpec {
                g: ScalarFunction::Sine { amplitude: 1.0, frequency: 1.0, offset: 0.0 },
                h: ScalarFunction::Affine { slope: 0.5, offset: 1.0 },
                gamma: 1.0,
            },
            initial: InitialCondition::Bump { center: [0.5, 0.0, 0.0], width: 0.3, amplitude: 1.0 },
            ensemble: EnsembleConfig { size: 4 },
            solver: SolverConfig::default(),
            output: OutputConfig::default(),
            verify: VerifyConfig::default(),
        }
    }
}
