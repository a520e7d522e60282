//! Empirical calibration of the constant `c_T` in the GRR inequality.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::fbm::{FbmMethod, FbmSampler, TimeGrid};
use crate::grr::{implied_c_t, GrrExponents};
use crate::rng;

/// The Hurst sweep standing in for a whole sequence `(H_i)`.
pub const HURST_SWEEP: [f64; 5] = [0.55, 0.65, 0.75, 0.85, 0.95];

/// Corpus design and the constant it produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub c_t: f64,
    pub margin: f64,
    pub max_implied: f64,
    /// Corpus member attaining `max_implied`.
    pub binding: String,
    pub horizon: f64,
    pub n_steps: usize,
    pub epsilon: f64,
    pub hursts: Vec<f64>,
    pub paths_per_hurst: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationSpec {
    pub horizon: f64,
    pub n_steps: usize,
    pub epsilon: f64,
    pub hursts: Vec<f64>,
    pub paths_per_hurst: usize,
    pub seed: u64,
    pub margin: f64,
}

impl Default for CalibrationSpec {
    fn default() -> Self {
        CalibrationSpec {
            horizon: 1.0,
            n_steps: 256,
            epsilon: 0.0125,
            hursts: HURST_SWEEP.to_vec(),
            paths_per_hurst: 200,
            seed: 20_240_601,
            margin: 1.05,
        }
    }
}

/// Deterministic members: linear, quadratic and sinusoids of 1 to 4 cycles.
pub fn deterministic_corpus(grid: TimeGrid) -> Vec<(String, Vec<f64>)> {
    let t = grid.nodes();
    let h = grid.horizon();
    let mut out = vec![
        ("linear".to_string(), t.clone()),
        ("quadratic".to_string(), t.iter().map(|x| x * x).collect()),
    ];
    for k in 1..=4 {
        let w = std::f64::consts::TAU * k as f64 / h;
        out.push((format!("sine-{k}"), t.iter().map(|x| (w * x).sin()).collect()));
    }
    out
}

/// Largest implied `c_T` over a set of `(label, H, path)` members.
fn max_over(members: Vec<(String, f64, Vec<f64>)>, dt: f64, epsilon: f64) -> Result<(f64, String)> {
    let rows: Vec<Result<(f64, String)>> = members
        .into_par_iter()
        .map(|(label, h, v)| {
            let e = GrrExponents::for_increment_bound(h, epsilon)?;
            Ok((implied_c_t(&v, dt, e), label))
        })
        .collect();
    let mut best = (0.0, String::new());
    for r in rows {
        let (c, l) = r?;
        if c > best.0 {
            best = (c, l);
        }
    }
    Ok(best)
}

/// fBm members for one stream, labelled `fbm-H-index`.
fn fbm_members(spec: &CalibrationSpec, stream: u64, per_hurst: usize) -> Result<Vec<(String, f64, Vec<f64>)>> {
    let grid = TimeGrid::new(spec.horizon, spec.n_steps)?;
    let mut out = Vec::with_capacity(spec.hursts.len() * per_hurst);
    for (k, &h) in spec.hursts.iter().enumerate() {
        let sampler = FbmSampler::new(h, grid, FbmMethod::Cholesky)?;
        let seed = rng::derive_seed(spec.seed, &[stream, k as u64]);
        for (i, p) in sampler.sample_many(per_hurst, seed).into_iter().enumerate() {
            out.push((format!("fbm-{h}-{i}"), h, p.values));
        }
    }
    Ok(out)
}

pub fn calibrate(spec: &CalibrationSpec) -> Result<Calibration> {
    if !(spec.margin >= 1.0) {
        return domain(format!("calibration margin {} must be at least 1", spec.margin));
    }
    if spec.hursts.is_empty() {
        return domain("calibration needs at least one Hurst value");
    }
    let grid = TimeGrid::new(spec.horizon, spec.n_steps)?;
    let mut members = Vec::new();
    for &h in &spec.hursts {
        for (label, v) in deterministic_corpus(grid) {
            members.push((format!("{label}@{h}"), h, v));
        }
    }
    members.extend(fbm_members(spec, rng::stream::CALIBRATION, spec.paths_per_hurst)?);
    let (max_implied, binding) = max_over(members, grid.dt(), spec.epsilon)?;
    Ok(Calibration {
        c_t: spec.margin * max_implied,
        margin: spec.margin,
        max_implied,
        binding,
        horizon: spec.horizon,
        n_steps: spec.n_steps,
        epsilon: spec.epsilon,
        hursts: spec.hursts.clone(),
        paths_per_hurst: spec.paths_per_hurst,
        seed: spec.seed,
    })
}

/// Held-out fBm paths from a stream disjoint from the calibration stream.
pub fn held_out_paths(cal: &Calibration, h: f64, count: usize) -> Result<Vec<Vec<f64>>> {
    let spec = CalibrationSpec {
        horizon: cal.horizon,
        n_steps: cal.n_steps,
        epsilon: cal.epsilon,
        hursts: vec![h],
        paths_per_hurst: count,
        seed: rng::derive_seed(cal.seed, &[h.to_bits()]),
        margin: cal.margin,
    };
    Ok(fbm_members(&spec, rng::stream::HELD_OUT, count)?.into_iter().map(|m| m.2).collect())
}

const FROZEN: &str = include_str!("../data/grr_calibration.toml");

/// The calibration shipped with the crate.
pub fn frozen() -> Result<Calibration> {
    toml::from_str(FROZEN).map_err(|e| Error::Config(format!("frozen calibration: {e}")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grr::grr_check;

    #[test]
    fn frozen_constant_matches_its_design() {
        let cal = frozen().unwrap();
        let spec = CalibrationSpec::default();
        assert_eq!(cal.c_t, cal.margin * cal.max_implied);
        assert_eq!((cal.n_steps, cal.epsilon, cal.seed), (spec.n_steps, spec.epsilon, spec.seed));
        assert_eq!(cal.hursts, HURST_SWEEP.to_vec());
    }

    #[test]
    fn deterministic_members_pass_with_frozen_constant() {
        let cal = frozen().unwrap();
        let grid = TimeGrid::new(cal.horizon, cal.n_steps).unwrap();
        for &h in &HURST_SWEEP {
            let e = GrrExponents::for_increment_bound(h, cal.epsilon).unwrap();
            for (label, v) in deterministic_corpus(grid) {
                let r = grr_check(&v, grid.dt(), e, cal.c_t).unwrap();
                assert!(r.pass && r.max_ratio <= 1.0, "{label} at H={h}: {}", r.max_ratio);
            }
        }
    }

    #[test]
    fn small_calibration_is_reproducible() {
        let spec = CalibrationSpec { n_steps: 32, paths_per_hurst: 4, hursts: vec![0.6, 0.9], ..Default::default() };
        let a = calibrate(&spec).unwrap();
        assert_eq!(a, calibrate(&spec).unwrap());
        assert_eq!(a.c_t, 1.05 * a.max_implied);
        assert!(calibrate(&CalibrationSpec { margin: 0.9, ..spec }).is_err());
    }

    #[test]
    fn held_out_stream_differs() {
        let cal = frozen().unwrap();
        let a = held_out_paths(&cal, 0.75, 2).unwrap();
        let spec = CalibrationSpec { hursts: vec![0.75], paths_per_hurst: 2, ..Default::default() };
        let b = fbm_members(&spec, rng::stream::CALIBRATION, 2).unwrap();
        assert_ne!(a[0], b[0].2);
        assert_eq!(a, held_out_paths(&cal, 0.75, 2).unwrap());
    }
}
