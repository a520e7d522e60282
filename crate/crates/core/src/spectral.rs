//! Finite spectral realization of the noise covariance operator.
//!
//! Eigenvectors come from the discrete Neumann Laplacian of a horn grid,
//! orthonormal in the mass-weighted inner product. Eigenvalues of the
//! covariance are assigned as `λ_i = (1 + μ_i)^{−s}`.

use std::sync::Arc;

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::domain::HornGrid;
use crate::error::{domain, Error, Result};
use crate::fbm::{sample_fbm_family_with, HurstSequence, SamplerCache, FbmMethod, TimeGrid};
use crate::young::ls_slope;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralBasis {
    /// Covariance eigenvalues `λ_i`, nonincreasing.
    pub eigenvalues: Vec<f64>,
    /// Laplacian eigenvalues `μ_i`, nondecreasing.
    pub laplacian_eigenvalues: Vec<f64>,
    /// Nodal eigenvectors, mass-orthonormal.
    pub vectors: Vec<Vec<f64>>,
    pub sup_norms: Vec<f64>,
    pub decay_exponent: f64,
    /// Nodal values of `x ↦ ∫ |κ(x,y)|² dy` when a kernel was supplied.
    pub kernel_moment: Option<Vec<f64>>,
    /// Node masses of the grid the basis lives on.
    pub masses: Vec<f64>,
}

impl SpectralBasis {
    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    pub fn n_nodes(&self) -> usize {
        self.masses.len()
    }

    /// Mass-weighted Gram matrix of the modes.
    pub fn gram(&self) -> DMatrix<f64> {
        let k = self.len();
        DMatrix::from_fn(k, k, |i, j| {
            self.vectors[i].iter().zip(&self.vectors[j]).zip(&self.masses).map(|((a, b), m)| m * a * b).sum()
        })
    }

    /// Mode `i` scaled by `√λ_i`.
    pub fn scaled_mode(&self, i: usize) -> Vec<f64> {
        let s = self.eigenvalues[i].sqrt();
        self.vectors[i].iter().map(|v| s * v).collect()
    }

    /// `(v, e_i)` for every mode.
    pub fn project(&self, v: &[f64]) -> Vec<f64> {
        self.vectors
            .iter()
            .map(|e| e.iter().zip(v).zip(&self.masses).map(|((a, b), m)| m * a * b).sum())
            .collect()
    }

    /// Attaches the nodal moment `Σ_y m_y κ(x,y)²` of a closed-form kernel.
    pub fn with_kernel_moment(mut self, grid: &HornGrid, kernel: impl Fn(&[f64], &[f64]) -> f64) -> Self {
        let d = grid.dimension;
        let moment = grid
            .nodes
            .iter()
            .map(|x| grid.nodes.iter().map(|y| y.measure * kernel(&x.position[..d], &y.position[..d]).powi(2)).sum())
            .collect();
        self.kernel_moment = Some(moment);
        self
    }
}

/// Symmetrized Laplacian `M^{−1/2} S M^{−1/2}` with `S` the unit-conductivity
/// stiffness of the grid.
fn symmetric_laplacian(grid: &HornGrid) -> DMatrix<f64> {
    let n = grid.n_nodes();
    let inv_sqrt: Vec<f64> = grid.nodes.iter().map(|x| 1.0 / x.measure.sqrt()).collect();
    let mut b = DMatrix::zeros(n, n);
    for f in &grid.faces {
        let t = f.geometric_transmissibility();
        b[(f.a, f.a)] += t * inv_sqrt[f.a] * inv_sqrt[f.a];
        b[(f.b, f.b)] += t * inv_sqrt[f.b] * inv_sqrt[f.b];
        let off = -t * inv_sqrt[f.a] * inv_sqrt[f.b];
        b[(f.a, f.b)] += off;
        b[(f.b, f.a)] += off;
    }
    b
}

/// First `k` Neumann eigenpairs of the grid with `λ_i = (1 + μ_i)^{−s}`.
pub fn build_basis(grid: &HornGrid, k: usize, decay_exponent: f64) -> Result<SpectralBasis> {
    let n = grid.n_nodes();
    if k == 0 || k > n {
        return domain(format!("mode count must lie in 1..={n}, got {k}"));
    }
    if !(decay_exponent > 1.0) {
        return domain(format!("decay exponent must exceed 1, got {decay_exponent}"));
    }
    let b = symmetric_laplacian(grid);
    let scale = b.amax().max(1.0);
    let eig = SymmetricEigen::try_new(b.clone(), f64::EPSILON, 0)
        .ok_or_else(|| Error::Eigen { reason: "symmetric eigensolver did not converge".into(), residual: f64::NAN })?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));

    let inv_sqrt: Vec<f64> = grid.nodes.iter().map(|x| 1.0 / x.measure.sqrt()).collect();
    let mut mus = Vec::with_capacity(k);
    let mut vectors = Vec::with_capacity(k);
    let mut worst = 0.0f64;
    for &idx in order.iter().take(k) {
        let y = eig.eigenvectors.column(idx);
        let mu = eig.eigenvalues[idx].max(0.0);
        let r = (&b * y - y * eig.eigenvalues[idx]).amax();
        worst = worst.max(r);
        let mut e: Vec<f64> = y.iter().zip(&inv_sqrt).map(|(a, s)| a * s).collect();
        // Deterministic sign: the entry of largest magnitude is positive.
        let pivot = e.iter().copied().fold(0.0f64, |acc, v| if v.abs() > acc.abs() + 1e-12 { v } else { acc });
        if pivot < 0.0 {
            e.iter_mut().for_each(|v| *v = -*v);
        }
        mus.push(mu);
        vectors.push(e);
    }
    if worst > 1e-8 * scale {
        return Err(Error::Eigen { reason: "eigenpair residual too large".into(), residual: worst });
    }
    // The kernel is spanned by constants; pin mode 1 to its exact form.
    if mus[0] < 1e-10 * scale {
        mus[0] = 0.0;
        let c = 1.0 / grid.measure_total.sqrt();
        vectors[0] = vec![c; n];
    }
    let eigenvalues: Vec<f64> = mus.iter().map(|m| (1.0 + m).powf(-decay_exponent)).collect();
    let sup_norms = vectors.iter().map(|e| e.iter().fold(0.0f64, |a, v| a.max(v.abs()))).collect();
    Ok(SpectralBasis {
        eigenvalues,
        laplacian_eigenvalues: mus,
        vectors,
        sup_norms,
        decay_exponent,
        kernel_moment: None,
        masses: grid.masses(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    Pass,
    Fail,
    Indeterminate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralReport {
    pub partial_sum: f64,
    /// `None` when too few modes were available to fit a tail.
    pub extrapolated_tail: Option<f64>,
    pub fitted_exponent: Option<f64>,
    pub verdict: Verdict,
}

const MIN_MODES_FOR_FIT: usize = 8;

/// Summability test for `Σ √λ_i ‖e_i‖_∞`.
pub fn check_spectral_condition(basis: &SpectralBasis) -> SpectralReport {
    spectral_condition(&basis.eigenvalues, &basis.sup_norms)
}

/// As [`check_spectral_condition`] on raw `(λ_i, ‖e_i‖_∞)` sequences.
///
/// The summands of the upper half of the modes are fitted to `C i^p` in
/// log-log coordinates. The series is declared convergent iff `p < −1`, and
/// the remainder is estimated as `C ∫_{K+1/2}^∞ x^p dx`.
pub fn spectral_condition(eigenvalues: &[f64], sup_norms: &[f64]) -> SpectralReport {
    let terms: Vec<f64> = eigenvalues.iter().zip(sup_norms).map(|(l, s)| l.sqrt() * s).collect();
    let partial_sum = terms.iter().sum();
    let k = terms.len();
    if k < MIN_MODES_FOR_FIT {
        return SpectralReport { partial_sum, extrapolated_tail: None, fitted_exponent: None, verdict: Verdict::Indeterminate };
    }
    let pts: Vec<(f64, f64)> = (k / 2..k)
        .filter(|&i| terms[i] > 0.0)
        .map(|i| (((i + 1) as f64).ln(), terms[i].ln()))
        .collect();
    if pts.len() < 2 {
        return SpectralReport { partial_sum, extrapolated_tail: Some(0.0), fitted_exponent: None, verdict: Verdict::Pass };
    }
    let p = ls_slope(&pts);
    let mean_x = pts.iter().map(|q| q.0).sum::<f64>() / pts.len() as f64;
    let mean_y = pts.iter().map(|q| q.1).sum::<f64>() / pts.len() as f64;
    let ln_c = mean_y - p * mean_x;
    // Exactly harmonic tails fit to −1 up to rounding; they must not pass.
    let convergent = p < -1.0 - 1e-9;
    let tail = if convergent {
        ln_c.exp() * (k as f64 + 0.5).powf(p + 1.0) / (-p - 1.0)
    } else {
        f64::INFINITY
    };
    SpectralReport {
        partial_sum,
        extrapolated_tail: Some(tail),
        fitted_exponent: Some(p),
        verdict: if convergent { Verdict::Pass } else { Verdict::Fail },
    }
}

/// Per-mode fBm increments driving the noise, `K × n_steps`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseIncrementSet {
    pub basis: Arc<SpectralBasis>,
    pub grid: TimeGrid,
    pub hursts: Vec<f64>,
    /// `increments[i][n] = B^{H_i}(t_{n+1}) − B^{H_i}(t_n)`.
    pub increments: Vec<Vec<f64>>,
    pub seed: u64,
}

impl NoiseIncrementSet {
    pub fn n_modes(&self) -> usize {
        self.increments.len()
    }

    /// Each increment split into `factor` equal parts, so the driving path is
    /// unchanged and only the time grid is refined.
    pub fn subdivided(&self, factor: usize) -> NoiseIncrementSet {
        let f = factor.max(1);
        NoiseIncrementSet {
            basis: Arc::clone(&self.basis),
            grid: self.grid.refined(f),
            hursts: self.hursts.clone(),
            increments: self
                .increments
                .iter()
                .map(|row| row.iter().flat_map(|&d| std::iter::repeat_n(d / f as f64, f)).collect())
                .collect(),
            seed: self.seed,
        }
    }

    /// Same increments over a different basis with as many modes, e.g. the
    /// basis of a refined mesh.
    pub fn with_basis(&self, basis: Arc<SpectralBasis>) -> Result<NoiseIncrementSet> {
        if basis.len() != self.n_modes() {
            return domain(format!("basis has {} modes, noise has {}", basis.len(), self.n_modes()));
        }
        Ok(NoiseIncrementSet { basis, ..self.clone() })
    }

    /// Mode path `B^{H_i}` on the time grid.
    pub fn path(&self, mode: usize) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.grid.n_nodes());
        let mut acc = 0.0;
        out.push(0.0);
        for d in &self.increments[mode] {
            acc += d;
            out.push(acc);
        }
        out
    }
}

/// Samples one fBm per retained mode, path `i` with exponent `H_i`.
pub fn sample_noise(basis: Arc<SpectralBasis>, hs: &HurstSequence, grid: TimeGrid, seed: u64) -> Result<NoiseIncrementSet> {
    let k = basis.len();
    if k > hs.len() {
        return domain(format!("basis has {k} modes but only {} Hurst values", hs.len()));
    }
    let paths = sample_fbm_family_with(hs, grid, k, seed, &mut SamplerCache::new(FbmMethod::Cholesky))?;
    Ok(NoiseIncrementSet {
        basis,
        grid,
        hursts: hs.values()[..k].to_vec(),
        increments: paths.iter().map(|p| p.increments()).collect(),
        seed,
    })
}

/// `Σ_i √λ_i e_i ΔB^{H_i}_step` as a nodal field.
pub fn evaluate_noise_field(set: &NoiseIncrementSet, step: usize) -> Result<Vec<f64>> {
    if step >= set.grid.n_steps() {
        return Err(Error::Index { index: step, len: set.grid.n_steps() });
    }
    let b = &set.basis;
    let mut field = vec![0.0; b.n_nodes()];
    for i in 0..set.n_modes() {
        let c = b.eigenvalues[i].sqrt() * set.increments[i][step];
        if c != 0.0 {
            for (f, e) in field.iter_mut().zip(&b.vectors[i]) {
                *f += c * e;
            }
        }
    }
    Ok(field)
}

/// Rows `(i, λ_i, ‖e_i‖_∞)` for export.
pub fn basis_table(basis: &SpectralBasis) -> Vec<(usize, f64, f64)> {
    (0..basis.len()).map(|i| (i + 1, basis.eigenvalues[i], basis.sup_norms[i])).collect()
}


#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{build_grid, BoundaryCurve};
    use approx::assert_relative_eq;

    fn grid() -> HornGrid {
        build_grid(&BoundaryCurve::gaussian(), 2, 3.0, 0.1).unwrap()
    }

    #[test]
    fn first_mode_is_constant() {
        let g = grid();
        let b = build_basis(&g, 1, 4.0).unwrap();
        assert_eq!(b.laplacian_eigenvalues[0], 0.0);
        assert_eq!(b.eigenvalues[0], 1.0);
        for v in &b.vectors[0] {
            assert_relative_eq!(*v, 1.0 / g.measure_total.sqrt(), epsilon = 1e-15);
        }
    }

    #[test]
    fn modes_are_orthonormal_and_ordered() {
        let g = grid();
        let b = build_basis(&g, 20, 4.0).unwrap();
        let gram = b.gram();
        for i in 0..20 {
            for j in 0..20 {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((gram[(i, j)] - want).abs() < 1e-10, "gram[{i},{j}] = {}", gram[(i, j)]);
            }
        }
        assert!(b.eigenvalues.windows(2).all(|w| w[0] >= w[1]));
        assert!(b.eigenvalues.iter().all(|&l| l > 0.0));
        assert!(build_basis(&g, 0, 4.0).is_err());
        assert!(build_basis(&g, 5, 1.0).is_err());
        assert!(build_basis(&g, g.n_nodes() + 1, 4.0).is_err());
    }

    #[test]
    fn p_series_verdicts() {
        let k = 400;
        let sup = vec![1.0; k];
        let l4: Vec<f64> = (1..=k).map(|i| (i as f64).powi(-4)).collect();
        let r = spectral_condition(&l4, &sup);
        assert_eq!(r.verdict, Verdict::Pass);
        let total = r.partial_sum + r.extrapolated_tail.unwrap();
        assert_relative_eq!(total, std::f64::consts::PI.powi(2) / 6.0, max_relative = 1e-5);
        let l2: Vec<f64> = (1..=k).map(|i| (i as f64).powi(-2)).collect();
        let r = spectral_condition(&l2, &sup);
        assert_eq!(r.verdict, Verdict::Fail);
        assert_relative_eq!(r.fitted_exponent.unwrap(), -1.0, epsilon = 1e-9);
        let r = spectral_condition(&l4[..7], &sup[..7]);
        assert_eq!(r.verdict, Verdict::Indeterminate);
        assert!(r.extrapolated_tail.is_none());
    }

    #[test]
    fn noise_field_examples() {
        let g = grid();
        let b = Arc::new(build_basis(&g, 3, 4.0).unwrap());
        let hs = HurstSequence::new(vec![0.7, 0.8, 0.9], 1.0, 0.35).unwrap();
        let tg = TimeGrid::new(1.0, 4).unwrap();
        let set = sample_noise(Arc::clone(&b), &hs, tg, 17).unwrap();
        assert_eq!(set.increments.len(), 3);
        assert_eq!(set.increments[0].len(), 4);
        assert_eq!(set, sample_noise(Arc::clone(&b), &hs, tg, 17).unwrap());
        let f = evaluate_noise_field(&set, 2).unwrap();
        let want: Vec<f64> = (0..g.n_nodes())
            .map(|x| (0..3).map(|i| b.eigenvalues[i].sqrt() * b.vectors[i][x] * set.increments[i][2]).sum())
            .collect();
        for (a, w) in f.iter().zip(&want) {
            assert_relative_eq!(a, w, epsilon = 1e-14);
        }
        assert!(matches!(evaluate_noise_field(&set, 4), Err(Error::Index { .. })));

        let mut zero = set.clone();
        zero.increments.iter_mut().for_each(|r| r.iter_mut().for_each(|v| *v = 0.0));
        assert!(evaluate_noise_field(&zero, 0).unwrap().iter().all(|&v| v == 0.0));

        let fine = set.subdivided(4);
        assert_eq!(fine.grid.n_steps(), 16);
        assert_relative_eq!(fine.path(1)[16], set.path(1)[4], epsilon = 1e-14);
    }

    #[test]
    fn too_many_modes_for_sequence() {
        let g = grid();
        let b = Arc::new(build_basis(&g, 3, 4.0).unwrap());
        let hs = HurstSequence::new(vec![0.7, 0.8], 1.0, 0.35).unwrap();
        assert!(sample_noise(b, &hs, TimeGrid::new(1.0, 4).unwrap(), 1).is_err());
    }
}
