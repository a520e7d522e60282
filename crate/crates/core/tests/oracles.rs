//! Closed-form and special-function oracles for the public API.

use std::f64::consts::PI;

use approx::assert_relative_eq;
use hornspde::domain::{build_grid, validate_curve, BoundaryCurve, DEFAULT_EPSILONS, DEFAULT_S_MAX};
use hornspde::{estimate_lambda, fbm_covariance, young_integrate, FbmMethod, FbmSampler, IntegrandPath, TimeGrid};
use statrs::function::erf::erfc;
use statrs::function::gamma::gamma;

#[test]
fn gaussian_tails_match_erfc() {
    let b = BoundaryCurve::gaussian();
    for l in [0.5, 1.0, 2.0, 3.0] {
        assert_relative_eq!(b.tail_integral(l, 1), 0.5 * PI.sqrt() * erfc(l), max_relative = 1e-8);
        assert_relative_eq!(b.tail_integral(l, 2), (PI / 8.0).sqrt() * erfc(2f64.sqrt() * l), max_relative = 1e-8);
    }
}

#[test]
fn stretched_exponential_area_matches_gamma() {
    for delta in [0.5, 1.0, 2.0] {
        let b = BoundaryCurve::StretchedExp { scale: 1.3, delta };
        let m = 1.0 + delta;
        let whole = b.integral_pow(0.0, 2.0, 1) + b.tail_integral(2.0, 1);
        assert_relative_eq!(whole, 1.3 * gamma(1.0 + 1.0 / m), max_relative = 1e-7);
    }
}

#[test]
fn two_dimensional_measure() {
    for h in [0.2, 0.1, 0.05] {
        let g = build_grid(&BoundaryCurve::gaussian(), 2, 3.0, h).unwrap();
        let total: f64 = g.masses().iter().sum::<f64>() + g.tail_measure;
        assert_relative_eq!(total, 0.5 * PI.sqrt(), max_relative = 1e-9);
    }
}

#[test]
fn three_dimensional_measure() {
    // π ∫_0^∞ exp(−2x²) dx
    let exact = PI * (PI / 8.0).sqrt();
    let mut errors = Vec::new();
    for h in [0.25, 0.125] {
        let g = build_grid(&BoundaryCurve::gaussian(), 3, 2.5, h).unwrap();
        let total: f64 = g.masses().iter().sum::<f64>() + g.tail_measure;
        errors.push((total - exact).abs() / exact);
    }
    assert!(errors.iter().all(|e| *e < 1e-3), "{errors:?}");
}

#[test]
fn curve_admissibility() {
    let ok = validate_curve(&BoundaryCurve::StretchedExp { scale: 1.0, delta: 0.5 }, &DEFAULT_EPSILONS, DEFAULT_S_MAX).unwrap();
    assert!(ok.admissible, "{:?}", ok.reasons);
    let bad = validate_curve(&BoundaryCurve::Exp { scale: 1.0, rate: 1.0 }, &DEFAULT_EPSILONS, DEFAULT_S_MAX).unwrap();
    assert!(!bad.admissible);
    let power = validate_curve(&BoundaryCurve::Power { scale: 1.0, power: 3.0 }, &DEFAULT_EPSILONS, DEFAULT_S_MAX).unwrap();
    assert!(!power.admissible);
}

#[test]
fn covariance_closed_form() {
    assert_relative_eq!(fbm_covariance(0.5, 0.3, 0.7).unwrap(), 0.3, epsilon = 1e-15);
    // H = 1 would be B(t) = t Z; close to it the covariance approaches s t.
    assert_relative_eq!(fbm_covariance(0.999, 0.3, 0.7).unwrap(), 0.21, epsilon = 2e-3);
    let h = 0.7f64;
    assert_relative_eq!(fbm_covariance(h, 1.0, 1.0).unwrap(), 1.0, epsilon = 1e-15);
    assert_relative_eq!(fbm_covariance(h, 1.0, 2.0).unwrap(), 0.5 * (1.0 + 2f64.powf(2.0 * h) - 1.0), epsilon = 1e-15);
}

#[test]
fn sampling_methods_share_the_law() {
    let grid = TimeGrid::new(1.0, 64).unwrap();
    for h in [0.6, 0.9] {
        for method in [FbmMethod::Cholesky, FbmMethod::CirculantEmbedding] {
            let s = FbmSampler::new(h, grid, method).unwrap();
            let paths = s.sample_many(4000, 11);
            let x: Vec<f64> = paths.iter().map(|p| p.values[64] * p.values[32]).collect();
            let n = x.len() as f64;
            let mean = x.iter().sum::<f64>() / n;
            let sd = (x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
            let exact = fbm_covariance(h, 1.0, 0.5).unwrap();
            assert!((mean - exact).abs() < 4.0 * sd / n.sqrt(), "{method:?} H={h}: {mean} vs {exact}");
        }
    }
}

#[test]
fn young_sum_of_smooth_integrand_against_linear_path() {
    // ∫_0^1 cos(t) d(2t) = 2 sin 1, left-point error O(dt).
    let grid = TimeGrid::new(1.0, 4096).unwrap();
    let b = hornspde::FbmPath { hurst: 0.9, grid, values: grid.nodes().iter().map(|t| 2.0 * t).collect(), seed: 0 };
    let f = IntegrandPath::from_fn(grid, f64::cos).unwrap();
    assert_relative_eq!(young_integrate(&f, &b, 0.0, 1.0).unwrap(), 2.0 * 1f64.sin(), max_relative = 1e-3);
}

#[test]
fn lambda_of_a_linear_path() {
    let grid = TimeGrid::new(1.0, 256).unwrap();
    let b = hornspde::FbmPath { hurst: 0.9, grid, values: grid.nodes(), seed: 0 };
    for alpha in [0.2, 0.3, 0.45] {
        let lam = estimate_lambda(&b, alpha).unwrap();
        assert_relative_eq!(lam.value, (PI * alpha).sin() / (PI * alpha), max_relative = 1e-9);
    }
}
