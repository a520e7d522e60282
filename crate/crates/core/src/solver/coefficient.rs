use nalgebra::{Matrix3, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Symmetric conductivity `k(x, t)` with closed-form ellipticity bounds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum CoefficientField {
    /// `c I`
    Isotropic { value: f64 },
    /// `diag(k₁, k₂, k₃)`
    Diagonal { values: [f64; 3] },
    /// `(1 + a sin(ω x_axial + ν t)) I`
    Oscillating { amplitude: f64, wavenumber: f64, frequency: f64 },
    /// `R(θ) diag(k₁, k₂) R(θ)ᵀ` in the `(x₁, x₂)` plane with
    /// `θ = θ₀ + ω x₁`, and `k₃` along `x₃`.
    Rotated { principal: [f64; 3], angle: f64, twist: f64 },
}

impl Default for CoefficientField {
    fn default() -> Self {
        CoefficientField::Isotropic { value: 1.0 }
    }
}

impl CoefficientField {
    /// `(k̲, k̄)` from the family's closed form.
    pub fn bounds(&self, dimension: usize) -> (f64, f64) {
        let dims = |v: &[f64; 3]| {
            let v = &v[..dimension.min(3)];
            (v.iter().copied().fold(f64::INFINITY, f64::min), v.iter().copied().fold(f64::NEG_INFINITY, f64::max))
        };
        match *self {
            CoefficientField::Isotropic { value } => (value, value),
            CoefficientField::Diagonal { values } => dims(&values),
            CoefficientField::Oscillating { amplitude, .. } => (1.0 - amplitude.abs(), 1.0 + amplitude.abs()),
            CoefficientField::Rotated { principal, .. } => dims(&principal),
        }
    }

    pub fn is_time_dependent(&self) -> bool {
        matches!(*self, CoefficientField::Oscillating { frequency, .. } if frequency != 0.0)
    }

    pub fn validate(&self, dimension: usize) -> Result<()> {
        let (lo, hi) = self.bounds(dimension);
        if !(lo > 0.0 && hi.is_finite()) {
            return Err(Error::Config(format!("coefficient {self:?} is not uniformly elliptic (bounds {lo}, {hi})")));
        }
        Ok(())
    }

    /// Full matrix at `(x, t)`; only the leading `dimension` block is used.
    pub fn matrix(&self, x: &[f64], t: f64, dimension: usize) -> Matrix3<f64> {
        match *self {
            CoefficientField::Isotropic { value } => Matrix3::identity() * value,
            CoefficientField::Diagonal { values } => Matrix3::from_diagonal(&values.into()),
            CoefficientField::Oscillating { amplitude, wavenumber, frequency } => {
                let axial = if dimension == 2 { x[0] } else { x[2] };
                Matrix3::identity() * (1.0 + amplitude * (wavenumber * axial + frequency * t).sin())
            }
            CoefficientField::Rotated { principal, angle, twist } => {
                let th = angle + twist * x[0];
                let (s, c) = th.sin_cos();
                let r = Matrix3::new(c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0);
                r * Matrix3::from_diagonal(&principal.into()) * r.transpose()
            }
        }
    }

    /// `e_axisᵀ k e_axis`.
    pub fn normal_component(&self, x: &[f64], t: f64, axis: usize, dimension: usize) -> f64 {
        self.matrix(x, t, dimension)[(axis, axis)]
    }

    /// Checks symmetry and `k̲|y|² ≤ (ky, y) ≤ k̄|y|²` at `(x, t)`.
    pub fn check_ellipticity(&self, x: &[f64], t: f64, dimension: usize) -> Result<()> {
        let m = self.matrix(x, t, dimension);
        let d = dimension;
        let block = m.view((0, 0), (d, d)).into_owned();
        if (&block - block.transpose()).amax() > 1e-12 * block.amax() {
            return Err(Error::Config(format!("coefficient not symmetric at {x:?}")));
        }
        let eig = SymmetricEigen::new(block);
        let (lo, hi) = self.bounds(dimension);
        let tol = 1e-12 * hi.abs().max(1.0);
        let emin = eig.eigenvalues.min();
        let emax = eig.eigenvalues.max();
        if emin < lo - tol || emax > hi + tol {
            return Err(Error::Config(format!(
                "ellipticity violated at {x:?}, t={t}: spectrum [{emin}, {emax}] outside [{lo}, {hi}]"
            )));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn rotated_field_is_symmetric_and_bounded() {
        let k = CoefficientField::Rotated { principal: [0.5, 2.0, 1.0], angle: 0.3, twist: 1.7 };
        for &x in &[0.0, 0.4, 2.5] {
            k.check_ellipticity(&[x, 0.1, 0.0], 0.0, 2).unwrap();
            k.check_ellipticity(&[x, 0.1, 0.7], 0.0, 3).unwrap();
        }
        assert_eq!(k.bounds(2), (0.5, 2.0));
        let m = k.matrix(&[0.0, 0.0, 0.0], 0.0, 2);
        assert_relative_eq!(m[(0, 1)], m[(1, 0)], epsilon = 1e-15);
    }

    #[test]
    fn non_elliptic_families_are_rejected() {
        assert!(CoefficientField::Oscillating { amplitude: 1.0, wavenumber: 1.0, frequency: 0.0 }.validate(2).is_err());
        assert!(CoefficientField::Isotropic { value: 0.0 }.validate(2).is_err());
        assert!(CoefficientField::Diagonal { values: [1.0, 2.0, -1.0] }.validate(2).is_ok());
        assert!(CoefficientField::Diagonal { values: [1.0, 2.0, -1.0] }.validate(3).is_err());
    }
}
