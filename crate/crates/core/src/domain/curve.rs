use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};
use crate::quadrature::GaussLegendre;

/// Closed-form boundary curves `b: [0, ∞) → (0, ∞)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum BoundaryCurve {
    /// `a · exp(−x^{1+δ})`
    StretchedExp { scale: f64, delta: f64 },
    /// `a · exp(−r x)`
    Exp { scale: f64, rate: f64 },
    /// `a · (1 + x)^{−p}`
    Power { scale: f64, power: f64 },
}

impl BoundaryCurve {
    pub fn gaussian() -> Self {
        BoundaryCurve::StretchedExp { scale: 1.0, delta: 1.0 }
    }

    pub fn validate_parameters(&self) -> Result<()> {
        let ok = match *self {
            BoundaryCurve::StretchedExp { scale, delta } => scale > 0.0 && delta > -1.0 && delta.is_finite(),
            BoundaryCurve::Exp { scale, rate } => scale > 0.0 && rate > 0.0,
            BoundaryCurve::Power { scale, power } => scale > 0.0 && power > 0.0,
        };
        if !ok || !self.scale().is_finite() {
            return domain(format!("invalid curve parameters: {self:?}"));
        }
        Ok(())
    }

    fn scale(&self) -> f64 {
        match *self {
            BoundaryCurve::StretchedExp { scale, .. }
            | BoundaryCurve::Exp { scale, .. }
            | BoundaryCurve::Power { scale, .. } => scale,
        }
    }

    /// `ln b(x)`, finite far beyond the point where `b` underflows.
    pub fn ln_value(&self, x: f64) -> f64 {
        match *self {
            BoundaryCurve::StretchedExp { scale, delta } => scale.ln() - x.powf(1.0 + delta),
            BoundaryCurve::Exp { scale, rate } => scale.ln() - rate * x,
            BoundaryCurve::Power { scale, power } => scale.ln() - power * (1.0 + x).ln(),
        }
    }

    pub fn value(&self, x: f64) -> f64 {
        self.ln_value(x).exp()
    }

    pub fn derivative(&self, x: f64) -> f64 {
        match *self {
            BoundaryCurve::StretchedExp { delta, .. } => {
                let m = 1.0 + delta;
                -m * x.powf(delta) * self.value(x)
            }
            BoundaryCurve::Exp { rate, .. } => -rate * self.value(x),
            BoundaryCurve::Power { power, .. } => -power * self.value(x) / (1.0 + x),
        }
    }

    /// Smallest `x ≥ 0` with `b(x) ≤ y`; zero when `y ≥ b(0)`.
    pub fn inverse(&self, y: f64) -> f64 {
        if y <= 0.0 {
            return f64::INFINITY;
        }
        let r = self.scale().ln() - y.ln();
        if r <= 0.0 {
            return 0.0;
        }
        match *self {
            BoundaryCurve::StretchedExp { delta, .. } => r.powf(1.0 / (1.0 + delta)),
            BoundaryCurve::Exp { rate, .. } => r / rate,
            BoundaryCurve::Power { power, .. } => (r / power).exp() - 1.0,
        }
    }

    /// `∫_a^b b(x)^k dx` for `k ∈ {1, 2}` by composite Gauss–Legendre.
    pub fn integral_pow(&self, a: f64, b: f64, k: i32) -> f64 {
        if b <= a {
            return 0.0;
        }
        let gl = GaussLegendre::new(12);
        let panels = ((b - a) / 0.25).ceil().max(1.0) as usize;
        gl.integrate_composite(a, b, panels, |x| (k as f64 * self.ln_value(x)).exp())
    }

    /// `∫_L^∞ b(x)^k dx`.
    pub fn tail_integral(&self, l: f64, k: i32) -> f64 {
        if let BoundaryCurve::Power { scale, power } = *self {
            let e = k as f64 * power;
            if e <= 1.0 {
                return f64::INFINITY;
            }
            return scale.powi(k) * (1.0 + l).powf(1.0 - e) / (e - 1.0);
        }
        // Integrate until b^k has fallen by a factor e^{-60} relative to b(L)^k.
        let target = self.ln_value(l) - 60.0 / k as f64;
        let end = self.inverse(target.exp()).max(l + 1.0);
        let end = if end.is_finite() { end } else { l + 100.0 };
        let gl = GaussLegendre::new(16);
        let panels = (((end - l) / 0.05).ceil() as usize).clamp(8, 20_000);
        gl.integrate_composite(l, end, panels, |x| (k as f64 * self.ln_value(x)).exp())
    }
}

/// One row of the ratio table: `ln b(s+ε) − ln b(s)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RatioSample {
    pub epsilon: f64,
    pub s: f64,
    pub log_ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveReport {
    pub admissible: bool,
    pub positive: bool,
    pub decreasing: bool,
    pub bounded_derivative: bool,
    /// Per ε: ratios decrease along the sweep and end below the threshold.
    pub ratio_decay: Vec<(f64, bool)>,
    pub ratios: Vec<RatioSample>,
    pub reasons: Vec<String>,
}

pub const DEFAULT_EPSILONS: [f64; 3] = [0.1, 0.5, 1.0];
pub const DEFAULT_S_MAX: f64 = 1e4;
const FINAL_RATIO: f64 = 1e-3;
const SWEEP_POINTS: usize = 80;

/// Numerical test of `b(s+ε)/b(s) → 0` for every ε, plus positivity,
/// monotone decrease and a bounded derivative, all by sampling.
pub fn validate_curve(curve: &BoundaryCurve, epsilons: &[f64], s_max: f64) -> Result<CurveReport> {
    curve.validate_parameters()?;
    if epsilons.is_empty() || epsilons.iter().any(|&e| !(e > 0.0)) {
        return domain("epsilons must be positive and nonempty");
    }
    if !(s_max > 1.0 && s_max.is_finite()) {
        return domain(format!("s_max must exceed 1, got {s_max}"));
    }
    let s0 = 1e-2;
    let sweep: Vec<f64> = (0..SWEEP_POINTS)
        .map(|k| s0 * (s_max / s0).powf(k as f64 / (SWEEP_POINTS - 1) as f64))
        .collect();
    let mut reasons = Vec::new();

    let lb: Vec<f64> = std::iter::once(0.0).chain(sweep.iter().copied()).map(|s| curve.ln_value(s)).collect();
    let positive = lb.iter().all(|v| v.is_finite() || *v == f64::NEG_INFINITY) && lb[0].is_finite();
    if !positive {
        reasons.push("b is not positive and finite on the sweep".into());
    }
    let decreasing = lb.windows(2).all(|w| w[1] < w[0]);
    if !decreasing {
        reasons.push("b is not strictly decreasing on the sweep".into());
    }
    let dense: Vec<f64> = (0..=2000).map(|k| s_max.min(50.0) * k as f64 / 2000.0).chain(sweep.iter().copied()).collect();
    let dmax = dense.iter().map(|&x| curve.derivative(x).abs()).fold(0.0, f64::max);
    let bounded_derivative = dmax.is_finite() && dense.iter().all(|&x| curve.derivative(x) <= 0.0);
    if !bounded_derivative {
        reasons.push(format!("derivative not bounded (sampled sup {dmax:.3e})"));
    }

    let mut ratios = Vec::new();
    let mut ratio_decay = Vec::new();
    for &eps in epsilons {
        let row: Vec<f64> = sweep.iter().map(|&s| curve.ln_value(s + eps) - curve.ln_value(s)).collect();
        let tol = 1e-12;
        let monotone = row.windows(2).all(|w| w[1] <= w[0] + tol * w[0].abs().max(1.0));
        let strict = row[row.len() - 1] < row[0] - tol;
        let small = row[row.len() - 1] < FINAL_RATIO.ln();
        let ok = monotone && strict && small;
        if !ok {
            reasons.push(format!(
                "ratio b(s+{eps})/b(s) does not decay to 0 (final {:.3e})",
                row[row.len() - 1].exp()
            ));
        }
        ratio_decay.push((eps, ok));
        ratios.extend(sweep.iter().zip(&row).map(|(&s, &log_ratio)| RatioSample { epsilon: eps, s, log_ratio }));
    }
    let admissible = positive && decreasing && bounded_derivative && ratio_decay.iter().all(|r| r.1);
    Ok(CurveReport { admissible, positive, decreasing, bounded_derivative, ratio_decay, ratios, reasons })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn stretched_exponential_is_admissible() {
        let c = BoundaryCurve::StretchedExp { scale: 1.0, delta: 0.5 };
        let r = validate_curve(&c, &DEFAULT_EPSILONS, DEFAULT_S_MAX).unwrap();
        assert!(r.admissible, "{:?}", r.reasons);
    }

    #[test]
    fn exponential_and_power_are_not() {
        let c = BoundaryCurve::Exp { scale: 1.0, rate: 1.0 };
        let r = validate_curve(&c, &DEFAULT_EPSILONS, DEFAULT_S_MAX).unwrap();
        assert!(!r.admissible);
        assert!(r.positive && r.decreasing && r.bounded_derivative);
        for s in r.ratios.iter() {
            assert_relative_eq!(s.log_ratio, -s.epsilon, epsilon = 1e-9);
        }
        let p = BoundaryCurve::Power { scale: 1.0, power: 3.0 };
        assert!(!validate_curve(&p, &DEFAULT_EPSILONS, DEFAULT_S_MAX).unwrap().admissible);
    }

    #[test]
    fn gaussian_log_ratio_at_five() {
        let c = BoundaryCurve::gaussian();
        assert_relative_eq!(c.ln_value(6.0) - c.ln_value(5.0), -11.0, epsilon = 1e-12);
        assert!(validate_curve(&c, &[1.0], 1e4).unwrap().admissible);
    }

    #[test]
    fn unbounded_derivative_is_rejected() {
        let c = BoundaryCurve::StretchedExp { scale: 1.0, delta: -0.5 };
        let r = validate_curve(&c, &DEFAULT_EPSILONS, DEFAULT_S_MAX).unwrap();
        assert!(!r.bounded_derivative);
        assert!(!r.admissible);
    }

    #[test]
    fn inverse_round_trips() {
        for c in [
            BoundaryCurve::gaussian(),
            BoundaryCurve::Exp { scale: 2.0, rate: 0.5 },
            BoundaryCurve::Power { scale: 1.5, power: 2.0 },
        ] {
            for &x in &[0.1, 1.0, 3.0] {
                assert_relative_eq!(c.inverse(c.value(x)), x, max_relative = 1e-10);
            }
            assert_eq!(c.inverse(10.0), 0.0);
        }
    }

    #[test]
    fn derivative_matches_finite_difference() {
        let c = BoundaryCurve::StretchedExp { scale: 1.3, delta: 0.5 };
        let h = 1e-6;
        for &x in &[0.2, 1.0, 2.5] {
            let fd = (c.value(x + h) - c.value(x - h)) / (2.0 * h);
            assert_relative_eq!(c.derivative(x), fd, max_relative = 1e-6);
        }
    }

    #[test]
    fn bad_parameters_are_errors() {
        assert!(validate_curve(&BoundaryCurve::Exp { scale: -1.0, rate: 1.0 }, &[1.0], 100.0).is_err());
        assert!(validate_curve(&BoundaryCurve::gaussian(), &[], 100.0).is_err());
        assert!(validate_curve(&BoundaryCurve::gaussian(), &[-1.0], 100.0).is_err());
    }
}
