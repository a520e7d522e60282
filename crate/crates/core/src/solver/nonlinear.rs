use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Scalar functions applied nodally.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum ScalarFunction {
    Zero,
    Constant { value: f64 },
    /// `a u + b`
    Affine { slope: f64, offset: f64 },
    /// `a sin(ω u) + b`
    Sine { amplitude: f64, frequency: f64, offset: f64 },
    /// `a tanh(u) + b`
    Tanh { amplitude: f64, offset: f64 },
}

impl ScalarFunction {
    pub fn eval(&self, u: f64) -> f64 {
        match *self {
            ScalarFunction::Zero => 0.0,
            ScalarFunction::Constant { value } => value,
            ScalarFunction::Affine { slope, offset } => slope * u + offset,
            ScalarFunction::Sine { amplitude, frequency, offset } => amplitude * (frequency * u).sin() + offset,
            ScalarFunction::Tanh { amplitude, offset } => amplitude * u.tanh() + offset,
        }
    }

    pub fn derivative(&self, u: f64) -> f64 {
        match *self {
            ScalarFunction::Zero | ScalarFunction::Constant { .. } => 0.0,
            ScalarFunction::Affine { slope, .. } => slope,
            ScalarFunction::Sine { amplitude, frequency, .. } => amplitude * frequency * (frequency * u).cos(),
            ScalarFunction::Tanh { amplitude, .. } => amplitude / u.cosh().powi(2),
        }
    }

    /// Closed-form Lipschitz constant.
    pub fn lipschitz(&self) -> f64 {
        match *self {
            ScalarFunction::Zero | ScalarFunction::Constant { .. } => 0.0,
            ScalarFunction::Affine { slope, .. } => slope.abs(),
            ScalarFunction::Sine { amplitude, frequency, .. } => (amplitude * frequency).abs(),
            ScalarFunction::Tanh { amplitude, .. } => amplitude.abs(),
        }
    }

    /// Closed-form Lipschitz constant of the derivative, which bounds its
    /// γ-Hölder constant on bounded sets for every γ ≤ 1.
    pub fn derivative_lipschitz(&self) -> f64 {
        match *self {
            ScalarFunction::Zero | ScalarFunction::Constant { .. } | ScalarFunction::Affine { .. } => 0.0,
            ScalarFunction::Sine { amplitude, frequency, .. } => (amplitude * frequency * frequency).abs(),
            // sup |tanh''| = 4/(3√3)
            ScalarFunction::Tanh { amplitude, .. } => amplitude.abs() * 4.0 / (3.0 * 3f64.sqrt()),
        }
    }

    pub fn is_affine(&self) -> bool {
        matches!(self, ScalarFunction::Zero | ScalarFunction::Constant { .. } | ScalarFunction::Affine { .. })
    }

    /// `(a, b)` with `f(u) = a u + b` for affine families.
    pub fn affine_coefficients(&self) -> Option<(f64, f64)> {
        match *self {
            ScalarFunction::Zero => Some((0.0, 0.0)),
            ScalarFunction::Constant { value } => Some((0.0, value)),
            ScalarFunction::Affine { slope, offset } => Some((slope, offset)),
            _ => None,
        }
    }

    pub fn apply(&self, u: &[f64]) -> Vec<f64> {
        u.iter().map(|&x| self.eval(x)).collect()
    }
}

/// Reaction `g` and noise coefficient `h` with the Hölder exponent `γ` of `h'`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NonlinearitySpec {
    pub g: ScalarFunction,
    pub h: ScalarFunction,
    pub gamma: f64,
}

impl Default for NonlinearitySpec {
    fn default() -> Self {
        NonlinearitySpec { g: ScalarFunction::Zero, h: ScalarFunction::Zero, gamma: 1.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NonlinearityReport {
    pub g_lipschitz_sampled: f64,
    pub h_lipschitz_sampled: f64,
    pub h_derivative_holder_sampled: f64,
    pub h_affine: bool,
}

impl NonlinearitySpec {
    /// Verifies the declared constants by sampling on `[−R, R]`.
    pub fn verify(&self, radius: f64) -> Result<NonlinearityReport> {
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return Err(Error::Config(format!("gamma must lie in (0, 1], got {}", self.gamma)));
        }
        let n = 2001;
        let xs: Vec<f64> = (0..n).map(|k| -radius + 2.0 * radius * k as f64 / (n - 1) as f64).collect();
        let lip = |f: &dyn Fn(f64) -> f64, expo: f64| {
            let mut best = 0.0f64;
            for w in xs.windows(2) {
                best = best.max((f(w[1]) - f(w[0])).abs() / (w[1] - w[0]).powf(expo));
            }
            for stride in [7usize, 97, 700] {
                for k in 0..n - stride {
                    let (a, b) = (xs[k], xs[k + stride]);
                    best = best.max((f(b) - f(a)).abs() / (b - a).powf(expo));
                }
            }
            best
        };
        let gl = lip(&|u| self.g.eval(u), 1.0);
        let hl = lip(&|u| self.h.eval(u), 1.0);
        let hd = lip(&|u| self.h.derivative(u), self.gamma);
        let slack = 1.0 + 1e-9;
        if gl > self.g.lipschitz() * slack + 1e-12 {
            return Err(Error::Config(format!("g exceeds its Lipschitz constant: sampled {gl}")));
        }
        if hl > self.h.lipschitz() * slack + 1e-12 {
            return Err(Error::Config(format!("h exceeds its Lipschitz constant: sampled {hl}")));
        }
        // |h'(a) − h'(b)| ≤ L' |a − b| ≤ L' (2R)^{1−γ} |a − b|^γ on [−R, R].
        let holder_bound = self.h.derivative_lipschitz() * (2.0 * radius).powf(1.0 - self.gamma);
        if hd > holder_bound * slack + 1e-12 {
            return Err(Error::Config(format!("h' is not {}-Hölder with the declared constant", self.gamma)));
        }
        Ok(NonlinearityReport {
            g_lipschitz_sampled: gl,
            h_lipschitz_sampled: hl,
            h_derivative_holder_sampled: hd,
            h_affine: self.h.is_affine(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn declared_constants_hold() {
        let spec = NonlinearitySpec {
            g: ScalarFunction::Sine { amplitude: 0.7, frequency: 2.0, offset: 0.1 },
            h: ScalarFunction::Tanh { amplitude: 1.5, offset: 0.2 },
            gamma: 0.5,
        };
        let r = spec.verify(5.0).unwrap();
        assert!(r.g_lipschitz_sampled <= 1.4 + 1e-12);
        assert!(!r.h_affine);
    }

    #[test]
    fn affine_flags() {
        assert!(ScalarFunction::Zero.is_affine());
        assert!(ScalarFunction::Constant { value: 1.0 }.is_affine());
        assert_eq!(ScalarFunction::Affine { slope: 0.5, offset: 1.0 }.affine_coefficients(), Some((0.5, 1.0)));
        assert!(!ScalarFunction::Sine { amplitude: 1.0, frequency: 1.0, offset: 0.0 }.is_affine());
    }

    #[test]
    fn gamma_window() {
        let spec = NonlinearitySpec { gamma: 0.0, ..Default::default() };
        assert!(spec.verify(1.0).is_err());
    }
}
