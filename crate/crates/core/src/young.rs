//! Pathwise integration against fBm paths and the fractional-calculus
//! quantities that bound it.
//!
//! Every singular kernel is integrated in closed form against the
//! piecewise-linear interpolant of the nodal data; only smooth outer
//! integrals use Gauss–Legendre.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{domain, Result};
use crate::fbm::{FbmPath, TimeGrid};
use crate::quadrature::{abs_linear_power, GaussLegendre};

/// Nodal values of an integrand, interpolated linearly between nodes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntegrandPath {
    pub grid: TimeGrid,
    pub values: Vec<f64>,
}

impl IntegrandPath {
    pub fn new(grid: TimeGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.n_nodes() {
            return domain(format!("integrand has {} values, grid has {} nodes", values.len(), grid.n_nodes()));
        }
        if let Some(k) = values.iter().position(|v| !v.is_finite()) {
            return domain(format!("integrand value at node {k} is not finite"));
        }
        Ok(IntegrandPath { grid, values })
    }

    pub fn from_fn(grid: TimeGrid, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new(grid, grid.nodes().into_iter().map(f).collect())
    }
}

impl From<&FbmPath> for IntegrandPath {
    fn from(p: &FbmPath) -> Self {
        IntegrandPath { grid: p.grid, values: p.values.clone() }
    }
}

fn check_window(grid: &TimeGrid, other: &TimeGrid, t_from: f64, t_to: f64) -> Result<(usize, usize)> {
    if grid != other {
        return domain("integrand and integrator live on different grids");
    }
    let a = grid.node_index(t_from)?;
    let b = grid.node_index(t_to)?;
    if a > b {
        return domain(format!("integration window reversed: {t_from} > {t_to}"));
    }
    Ok((a, b))
}

/// Left-point Riemann–Stieltjes sum `Σ f(t_n)(B(t_{n+1}) − B(t_n))` over the
/// nodes in `[t_from, t_to]`. For Hölder exponents summing above one these
/// sums converge to the Young integral under refinement.
pub fn young_integrate(f: &IntegrandPath, b: &FbmPath, t_from: f64, t_to: f64) -> Result<f64> {
    let (a, z) = check_window(&f.grid, &b.grid, t_from, t_to)?;
    Ok(young_sum(&f.values, &b.values, a, z))
}

pub(crate) fn young_sum(f: &[f64], b: &[f64], from: usize, to: usize) -> f64 {
    (from..to).map(|n| f[n] * (b[n + 1] - b[n])).sum()
}

/// Running integral `t_k ↦ Σ_{n<k} f(t_n) ΔB_n`, starting at 0.
pub fn running_young_integral(f: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(b.len());
    let mut acc = 0.0;
    out.push(0.0);
    for n in 0..b.len().saturating_sub(1) {
        acc += f[n] * (b[n + 1] - b[n]);
        out.push(acc);
    }
    out
}

/// Richardson extrapolation of a quantity with error `C h^order`, from a
/// coarse and a fine value whose step sizes differ by `ratio`.
pub fn richardson(fine: f64, coarse: f64, ratio: f64, order: f64) -> f64 {
    let w = ratio.powf(order);
    (w * fine - coarse) / (w - 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LambdaEstimate {
    pub alpha: f64,
    pub value: f64,
    /// Number of time steps of the pair grid.
    pub n_steps: usize,
    pub mode: Option<usize>,
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha < 0.5) {
        return domain(format!("alpha must lie in (0, 1/2), got {alpha}"));
    }
    Ok(())
}

/// Discretized `Λ_α`: the supremum over node pairs `t < t*` of
/// `|(B(t)−B(t*))/(t*−t)^{1−α} + (1−α)∫_t^{t*}(B(t)−B(τ))/(τ−t)^{2−α}dτ|`,
/// times `sin(πα)/π`.
pub fn estimate_lambda(b: &FbmPath, alpha: f64) -> Result<LambdaEstimate> {
    check_alpha(alpha)?;
    let value = (PI * alpha).sin() / PI * lambda_sup(&b.values, b.grid.dt(), alpha);
    Ok(LambdaEstimate { alpha, value, n_steps: b.grid.n_steps(), mode: None })
}

/// Unscaled pair supremum behind [`estimate_lambda`].
pub fn lambda_sup(values: &[f64], dt: f64, alpha: f64) -> f64 {
    let n = values.len() - 1;
    // Offset-indexed powers of u = k·dt.
    let u: Vec<f64> = (0..=n).map(|k| k as f64 * dt).collect();
    let pa: Vec<f64> = u.iter().map(|&x| x.powf(alpha)).collect();
    let pam1: Vec<f64> = u.iter().map(|&x| if x > 0.0 { x.powf(alpha - 1.0) } else { 0.0 }).collect();
    let row = |i: usize| -> f64 {
        let bi = values[i];
        let mut acc = 0.0;
        let mut best = 0.0f64;
        for j in i + 1..=n {
            let k = j - i;
            let m = j - 1;
            let s = (values[j] - values[m]) / dt;
            acc += -s * (pa[k] - pa[k - 1]) / alpha;
            if k > 1 {
                let c = bi - values[m] + s * u[k - 1];
                acc += c * (pam1[k] - pam1[k - 1]) / (alpha - 1.0);
            }
            let v = (bi - values[j]) * pam1[k] + (1.0 - alpha) * acc;
            best = best.max(v.abs());
        }
        best
    };
    (0..n).into_par_iter().map(row).reduce(|| 0.0, f64::max)
}

/// The two integrals multiplying `Λ_α` in the generalized Stieltjes bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StieltjesWeight {
    /// `∫ |f(τ)| (τ − t*)^{−α} dτ`
    pub first: f64,
    /// `α ∫∫ |f(τ) − f(ρ)| (τ − ρ)^{−α−1} dρ dτ`
    pub second: f64,
}

impl StieltjesWeight {
    pub fn total(&self) -> f64 {
        self.first + self.second
    }
}

const OUTER_NODES: usize = 6;

/// Integrals of the Stieltjes bound over `[t_from, t_to]`, exact in the
/// singular variable for the linear interpolant of `f`.
pub fn stieltjes_weight(f: &IntegrandPath, alpha: f64, t_from: f64, t_to: f64) -> Result<StieltjesWeight> {
    check_alpha(alpha)?;
    let (a, z) = check_window(&f.grid, &f.grid, t_from, t_to)?;
    Ok(weight_on_nodes(&f.values, f.grid.dt(), alpha, a, z))
}

pub(crate) fn weight_on_nodes(f: &[f64], dt: f64, alpha: f64, a: usize, z: usize) -> StieltjesWeight {
    let slope = |m: usize| (f[m + 1] - f[m]) / dt;
    let mut first = 0.0;
    for m in a..z {
        let s = slope(m);
        let ua = (m - a) as f64 * dt;
        first += abs_linear_power(f[m] - s * ua, s, ua, ua + dt, -alpha);
    }

    // Outer variable τ = t_m + dt v², which smooths the (τ − t_m)^{1−α}
    // behaviour of the inner integral at the left end of each segment.
    let gl = GaussLegendre::new(OUTER_NODES);
    let mut second = 0.0;
    for m in a..z {
        let sm = slope(m);
        let mut seg = 0.0;
        for (v, w) in gl.on(0.0, 1.0) {
            let off = dt * v * v;
            let f_tau = f[m] + sm * off;
            let mut inner = sm.abs() * off.powf(1.0 - alpha) / (1.0 - alpha);
            for k in a..m {
                // ρ in [t_k, t_{k+1}], w = τ − ρ
                let sk = slope(k);
                let wa = off + (m - k - 1) as f64 * dt;
                let wb = wa + dt;
                let c0 = f_tau - f[k] - sk * (off + (m - k) as f64 * dt);
                inner += abs_linear_power(c0, sk, wa, wb, -alpha - 1.0);
            }
            seg += w * inner * 2.0 * dt * v;
        }
        second += seg;
    }
    StieltjesWeight { first, second: alpha * second }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StieltjesBound {
    pub lambda: LambdaEstimate,
    pub weight: StieltjesWeight,
    pub bound: f64,
}

/// `Λ_α(B) · [∫|f|(τ−t*)^{−α} + α∫∫|f(τ)−f(ρ)|(τ−ρ)^{−α−1}]` over
/// `[t_from, t_to]`, with `Λ_α` taken over the whole path.
pub fn stieltjes_bound(f: &IntegrandPath, b: &FbmPath, alpha: f64, t_from: f64, t_to: f64) -> Result<StieltjesBound> {
    check_window(&f.grid, &b.grid, t_from, t_to)?;
    let lambda = estimate_lambda(b, alpha)?;
    let weight = stieltjes_weight(f, alpha, t_from, t_to)?;
    Ok(StieltjesBound { lambda, weight, bound: lambda.value * weight.total() })
}

/// Empirical Hölder exponent of a uniformly sampled series.
///
/// For dyadic lags `ℓ = 1, 2, …, n/8` the largest `|x(s+ℓ) − x(s)|` is taken
/// over the same `n/ℓ_max` starting points `s = 0, ℓ_max, 2ℓ_max, …` for every
/// lag, so all lags see equally many increments. The exponent is the
/// least-squares slope of `log M(ℓ)` against `log(ℓ dt)`. A constant series
/// returns `+∞`.
pub fn holder_exponent(series: &[f64], dt: f64) -> Result<f64> {
    if series.len() < 32 {
        return domain(format!("Hölder estimate needs at least 32 nodes, got {}", series.len()));
    }
    let n = series.len() - 1;
    let mut lag_max = 1usize;
    while lag_max * 2 <= n / 8 {
        lag_max *= 2;
    }
    let starts: Vec<usize> = (0..n / lag_max).map(|k| k * lag_max).filter(|&s| s + lag_max <= n).collect();
    let mut pts = Vec::new();
    let mut lag = 1usize;
    while lag <= lag_max {
        let m = starts.iter().map(|&s| (series[s + lag] - series[s]).abs()).fold(0.0, f64::max);
        if m > 0.0 {
            pts.push(((lag as f64 * dt).ln(), m.ln()));
        }
        lag *= 2;
    }
    if pts.len() < 2 {
        return Ok(f64::INFINITY);
    }
    Ok(ls_slope(&pts))
}

pub(crate) fn ls_slope(pts: &[(f64, f64)]) -> f64 {
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}
