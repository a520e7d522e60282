//! Garsia–Rodemich–Rumsey machinery: the double-integral functional, the
//! increment inequality it controls, the random variable `Θ` built from it,
//! and the audit of every parameter window the estimates rely on.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};
use crate::fbm::FbmPath;
use crate::quadrature::GaussLegendre;

/// Parameter windows derived from `(H, γ, α)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstraintReport {
    pub h_inf: f64,
    pub gamma: f64,
    pub alpha: f64,
    /// `1/(γ+1)`; `H̲` must exceed it.
    pub h_threshold: f64,
    /// Admissible `α` lie strictly inside this interval.
    pub alpha_window: (f64, f64),
    /// Admissible `ε` lie strictly inside this interval.
    pub epsilon_window: (f64, f64),
    pub canonical_epsilon: f64,
    pub violations: Vec<String>,
}

impl ConstraintReport {
    pub fn passes(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Recomputes every parameter window and lists the violated ones.
pub fn constraint_audit(values: &[f64], gamma: f64, alpha: f64) -> ConstraintReport {
    let mut violations = Vec::new();
    if values.is_empty() {
        violations.push("Hurst sequence is empty".to_string());
    }
    for (i, &h) in values.iter().enumerate() {
        if !(h > 0.5 && h < 1.0) {
            violations.push(format!("H_{} = {h} outside (1/2, 1)", i + 1));
        }
    }
    let h_inf = values.iter().copied().fold(f64::INFINITY, f64::min);
    if !(gamma > 0.0 && gamma <= 1.0) {
        violations.push(format!("gamma = {gamma} outside (0, 1]"));
    }
    let h_threshold = 1.0 / (gamma + 1.0);
    if !(h_inf > h_threshold) {
        violations.push(format!("infimum H = {h_inf} does not exceed 1/(gamma+1) = {h_threshold}"));
    }
    let alpha_window = (1.0 - h_inf, gamma / (gamma + 1.0));
    if !(alpha > alpha_window.0 && alpha < alpha_window.1) {
        violations.push(format!(
            "alpha = {alpha} outside ({}, {})",
            alpha_window.0, alpha_window.1
        ));
    }
    if !(1.0 - alpha > 0.5) {
        violations.push(format!("1 - alpha = {} does not exceed 1/2", 1.0 - alpha));
    }
    let epsilon_window = (0.0, h_inf - 1.0 + alpha);
    let canonical_epsilon = 0.5 * epsilon_window.1;
    if !(epsilon_window.1 > 0.0) {
        violations.push(format!("epsilon window (0, {}) is empty", epsilon_window.1));
    } else if !(epsilon_window.1 < h_threshold) {
        violations.push(format!(
            "H - 1 + alpha = {} is not below 1/(gamma+1) = {h_threshold}",
            epsilon_window.1
        ));
    }
    ConstraintReport { h_inf, gamma, alpha, h_threshold, alpha_window, epsilon_window, canonical_epsilon, violations }
}

/// `(q, β)` pair of the functional `∫∫ |f(σ)−f(τ)|^q / |σ−τ|^{βq+1}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GrrExponents {
    pub q: f64,
    pub beta: f64,
}

impl GrrExponents {
    pub fn new(q: f64, beta: f64) -> Result<Self> {
        if !(q >= 1.0 && q.is_finite()) {
            return domain(format!("q must be at least 1, got {q}"));
        }
        if !(beta * q > 1.0) {
            return domain(format!("beta * q must exceed 1, got beta={beta}, q={q}"));
        }
        if !(beta < 1.0) {
            return domain(format!("beta must be below 1 for a finite functional of a Lipschitz interpolant, got {beta}"));
        }
        Ok(GrrExponents { q, beta })
    }

    /// `q = 2/ε`, `β = H − ε/2`, so that `βq + 1 = 2H/ε`.
    pub fn for_increment_bound(hurst: f64, epsilon: f64) -> Result<Self> {
        if !(epsilon > 0.0) {
            return domain(format!("epsilon must be positive, got {epsilon}"));
        }
        Self::new(2.0 / epsilon, hurst - 0.5 * epsilon)
    }

    /// The factor `(β + 1/q)/(β − 1/q)` multiplying `c_T`.
    pub fn constant_factor(&self) -> f64 {
        (self.beta + 1.0 / self.q) / (self.beta - 1.0 / self.q)
    }

    /// Exponent `β − 1/q` of `|t* − t|` in the increment inequality.
    pub fn holder_exponent(&self) -> f64 {
        self.beta - 1.0 / self.q
    }
}

/// Streaming `ln Σ exp(x_i)`.
#[derive(Debug, Clone, Copy)]
struct LogSum {
    max: f64,
    scaled: f64,
}

impl LogSum {
    fn new() -> Self {
        LogSum { max: f64::NEG_INFINITY, scaled: 0.0 }
    }

    fn push(&mut self, x: f64) {
        if x == f64::NEG_INFINITY {
            return;
        }
        if x > self.max {
            self.scaled = self.scaled * (self.max - x).exp() + 1.0;
            self.max = x;
        } else {
            self.scaled += (x - self.max).exp();
        }
    }

    fn value(&self) -> f64 {
        if self.max == f64::NEG_INFINITY {
            f64::NEG_INFINITY
        } else {
            self.max + self.scaled.ln()
        }
    }
}

const CELL_NODES: usize = 4;
const RING_NODES: usize = 6;

/// Natural logarithm of the GRR double integral over `[0,T]²` of the linear
/// interpolant of `values`; `−∞` when every increment vanishes.
///
/// Diagonal cells are integrated exactly. On cells sharing a corner the
/// integrand is homogeneous around that corner, so one ring of the graded
/// subdivision plus its geometric tail gives the whole cell. Remaining cells
/// use tensor Gauss–Legendre.
pub fn grr_functional_ln(values: &[f64], dt: f64, exps: GrrExponents) -> f64 {
    let n = values.len() - 1;
    let GrrExponents { q, beta } = exps;
    let e = beta * q + 1.0;
    let p = q - e;
    let ln_h = dt.ln();

    let mut diag = LogSum::new();
    let diag_const = std::f64::consts::LN_2 + (p + 2.0) * ln_h - ((p + 1.0) * (p + 2.0)).ln();
    for k in 0..n {
        let s = (values[k + 1] - values[k]).abs() / dt;
        if s > 0.0 {
            diag.push(q * s.ln() + diag_const);
        }
    }

    let mut off = LogSum::new();

    // Adjacent cells: σ = t_{k+1} + x, τ = t_{k+1} − y with x, y ∈ [0, h].
    let ring = GaussLegendre::new(RING_NODES);
    let ring_tail = -(1.0 - 2f64.powf(-(p + 2.0))).ln();
    let half = 0.5 * dt;
    let squares = [(half, 0.0), (0.0, half), (half, half)];
    for k in 0..n.saturating_sub(1) {
        let s_hi = (values[k + 2] - values[k + 1]) / dt;
        let s_lo = (values[k + 1] - values[k]) / dt;
        if s_hi == 0.0 && s_lo == 0.0 {
            continue;
        }
        let mut cell = LogSum::new();
        for &(x0, y0) in &squares {
            for (x, wx) in ring.on(x0, x0 + half) {
                for (y, wy) in ring.on(y0, y0 + half) {
                    let df = (s_hi * x + s_lo * y).abs();
                    if df > 0.0 {
                        cell.push(q * df.ln() - e * (x + y).ln() + (wx * wy).ln());
                    }
                }
            }
        }
        off.push(cell.value() + ring_tail);
    }

    // Far cells, offset d ≥ 2.
    if n >= 3 {
        let gl = GaussLegendre::new(CELL_NODES);
        let xs: Vec<(f64, f64)> = gl.on(0.0, 1.0).collect();
        let mut lw = [[0.0; CELL_NODES]; CELL_NODES];
        for a in 0..CELL_NODES {
            for b in 0..CELL_NODES {
                lw[a][b] = (xs[a].1 * xs[b].1).ln() + 2.0 * ln_h;
            }
        }
        let fv: Vec<[f64; CELL_NODES]> = (0..n)
            .map(|k| {
                let mut r = [0.0; CELL_NODES];
                for a in 0..CELL_NODES {
                    r[a] = values[k] + (values[k + 1] - values[k]) * xs[a].0;
                }
                r
            })
            .collect();
        let mut ld = vec![[[0.0; CELL_NODES]; CELL_NODES]; n];
        for (d, tab) in ld.iter_mut().enumerate().skip(2) {
            for a in 0..CELL_NODES {
                for b in 0..CELL_NODES {
                    tab[a][b] = e * ((d as f64 + xs[a].0 - xs[b].0) * dt).ln() - lw[a][b];
                }
            }
        }
        for l in 2..n {
            let fl = &fv[l];
            for k in 0..l - 1 {
                let fk = &fv[k];
                let tab = &ld[l - k];
                for a in 0..CELL_NODES {
                    for b in 0..CELL_NODES {
                        let df = (fl[a] - fk[b]).abs();
                        if df > 0.0 {
                            off.push(q * df.ln() - tab[a][b]);
                        }
                    }
                }
            }
        }
    }

    let mut total = LogSum::new();
    total.push(diag.value());
    // Off-diagonal cells were visited once per unordered pair.
    total.push(off.value() + std::f64::consts::LN_2);
    total.value()
}

/// The GRR double integral itself; may overflow for large `q`, in which
/// case prefer [`grr_functional_ln`].
pub fn grr_functional(values: &[f64], dt: f64, exps: GrrExponents) -> f64 {
    grr_functional_ln(values, dt, exps).exp()
}

/// Outcome of checking `|f(t*)−f(t)| ≤ c_{β,q,T} (∫∫…)^{1/q} |t*−t|^{β−1/q}`
/// at every node pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrrReport {
    pub exponents: GrrExponents,
    pub c_t: f64,
    /// `ln` of the double integral.
    pub ln_functional: f64,
    /// Largest left-hand side over right-hand side; 0 for constant paths.
    pub max_ratio: f64,
    pub worst_pair: Option<(usize, usize)>,
    pub violations: usize,
    pub pass: bool,
}

/// Largest `|f_j − f_i| / |t_j − t_i|^θ` over node pairs, as a logarithm,
/// with the pair attaining it.
pub(crate) fn max_log_increment_ratio(values: &[f64], dt: f64, theta: f64) -> (f64, Option<(usize, usize)>) {
    let n = values.len() - 1;
    let lt: Vec<f64> = (0..=n).map(|d| theta * (d as f64 * dt).ln()).collect();
    let mut best = f64::NEG_INFINITY;
    let mut at = None;
    for i in 0..n {
        for j in i + 1..=n {
            let df = (values[j] - values[i]).abs();
            if df > 0.0 {
                let r = df.ln() - lt[j - i];
                if r > best {
                    best = r;
                    at = Some((i, j));
                }
            }
        }
    }
    (best, at)
}

/// Number of node pairs whose log-ratio exceeds `threshold`.
fn count_exceeding(values: &[f64], dt: f64, theta: f64, threshold: f64) -> usize {
    let n = values.len() - 1;
    let lt: Vec<f64> = (0..=n).map(|d| theta * (d as f64 * dt).ln()).collect();
    let mut count = 0;
    for i in 0..n {
        for j in i + 1..=n {
            let df = (values[j] - values[i]).abs();
            if df > 0.0 && df.ln() - lt[j - i] > threshold {
                count += 1;
            }
        }
    }
    count
}

/// The ratio `c_T` would need to equal for the inequality to be tight on
/// this path: `max |Δf| / ((β+1/q)/(β−1/q) · Θ̃^{1/q} · |Δt|^{β−1/q})`.
pub fn implied_c_t(values: &[f64], dt: f64, exps: GrrExponents) -> f64 {
    let ln_f = grr_functional_ln(values, dt, exps);
    let (lr, _) = max_log_increment_ratio(values, dt, exps.holder_exponent());
    if lr == f64::NEG_INFINITY {
        return 0.0;
    }
    (lr - ln_f / exps.q - exps.constant_factor().ln()).exp()
}

pub fn grr_check(values: &[f64], dt: f64, exps: GrrExponents, c_t: f64) -> Result<GrrReport> {
    if !(c_t > 0.0 && c_t.is_finite()) {
        return domain(format!("c_T must be positive and finite, got {c_t}"));
    }
    let ln_functional = grr_functional_ln(values, dt, exps);
    let theta = exps.holder_exponent();
    let (lr, worst_pair) = max_log_increment_ratio(values, dt, theta);
    if lr == f64::NEG_INFINITY {
        return Ok(GrrReport {
            exponents: exps,
            c_t,
            ln_functional,
            max_ratio: 0.0,
            worst_pair: None,
            violations: 0,
            pass: true,
        });
    }
    let ln_rhs = (c_t * exps.constant_factor()).ln() + ln_functional / exps.q;
    let max_ratio = (lr - ln_rhs).exp();
    let violations = if max_ratio > 1.0 { count_exceeding(values, dt, theta, ln_rhs) } else { 0 };
    Ok(GrrReport { exponents: exps, c_t, ln_functional, max_ratio, worst_pair, violations, pass: violations == 0 })
}

/// `Θ = Θ̃^{ε/2}` with `Θ̃` the functional at `q = 2/ε`, `β = H − ε/2`.
pub fn theta_estimate(path: &FbmPath, epsilon: f64) -> Result<f64> {
    let exps = GrrExponents::for_increment_bound(path.hurst, epsilon)?;
    let ln = grr_functional_ln(&path.values, path.grid.dt(), exps);
    Ok((0.5 * epsilon * ln).exp())
}

/// Constant of the increment bound `|B(t*)−B(t)| ≤ c Θ |t*−t|^{H̲−ε}`
/// obtained from `c_T`: `c_{β_i,q,T} = c_T H_i/(H_i−ε)` is bounded by
/// `c_T/(1/(γ+1) − ε)`, and lowering the exponent from `H_i − ε` to
/// `H̲ − ε` costs at most `max(1,T)^{1−H̲}`.
pub fn increment_constant(c_t: f64, gamma: f64, epsilon: f64, h_inf: f64, horizon: f64) -> Result<f64> {
    let gap = 1.0 / (gamma + 1.0) - epsilon;
    if !(gap > 0.0) {
        return domain(format!("epsilon = {epsilon} must be below 1/(gamma+1)"));
    }
    Ok(c_t / gap * horizon.max(1.0).powf(1.0 - h_inf))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IncrementReport {
    pub theta: f64,
    pub max_ratio: f64,
    pub pass: bool,
}

/// Checks `|B(t*)−B(t)| ≤ c Θ |t*−t|^{H̲−ε}` at every node pair.
pub fn increment_check(path: &FbmPath, epsilon: f64, h_inf: f64, constant: f64) -> Result<IncrementReport> {
    let theta = theta_estimate(path, epsilon)?;
    Ok(increment_check_with_theta(&path.values, path.grid.dt(), theta, epsilon, h_inf, constant))
}

/// As [`increment_check`], with `Θ` already known (for instance from
/// `exp(ε/2 · ln_functional)` of a [`GrrReport`] at the same exponents).
pub fn increment_check_with_theta(
    values: &[f64],
    dt: f64,
    theta: f64,
    epsilon: f64,
    h_inf: f64,
    constant: f64,
) -> IncrementReport {
    let (lr, _) = max_log_increment_ratio(values, dt, h_inf - epsilon);
    if lr == f64::NEG_INFINITY {
        return IncrementReport { theta, max_ratio: 0.0, pass: true };
    }
    let max_ratio = (lr - (constant * theta).ln()).exp();
    IncrementReport { theta, max_ratio, pass: max_ratio <= 1.0 }
}

/// Right-hand side of `Λ_α ≤ c T^a (H̲−ε+α)/a · Θ`, `a = H̲−ε−1+α`.
pub fn lambda_chain_bound(constant: f64, horizon: f64, h_inf: f64, epsilon: f64, alpha: f64, theta: f64) -> Result<f64> {
    let a = h_inf - epsilon - 1.0 + alpha;
    if !(a > 0.0) {
        return domain(format!("H - epsilon - 1 + alpha = {a} must be positive"));
    }
    Ok(constant * horizon.powf(a) * (h_inf - epsilon + alpha) / a * theta)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fbm::{sample_fbm, TimeGrid};
    use approx::assert_relative_eq;

    #[test]
    fn audit_examples() {
        let r = constraint_audit(&[0.75, 0.9], 1.0, 0.3);
        assert!(r.passes(), "{:?}", r.violations);
        assert_relative_eq!(r.canonical_epsilon, 0.025, epsilon = 1e-15);

        let r = constraint_audit(&[0.45], 1.0, 0.6);
        assert!(!r.passes());
        assert!(r.violations.iter().any(|v| v.contains("does not exceed 1/(gamma+1)")));

        let r = constraint_audit(&[0.7], 0.5, 0.32);
        assert!(r.passes(), "{:?}", r.violations);
        assert_relative_eq!(r.alpha_window.0, 0.3, epsilon = 1e-12);
        assert_relative_eq!(r.alpha_window.1, 1.0 / 3.0, epsilon = 1e-12);
        assert!(!constraint_audit(&[0.7], 0.5, 0.34).passes());
    }

    fn linear(n: usize) -> Vec<f64> {
        (0..=n).map(|k| k as f64 / n as f64).collect()
    }

    #[test]
    fn functional_of_linear_path() {
        let exps = GrrExponents::new(2.0, 0.6).unwrap();
        for &n in &[4, 64] {
            let v = grr_functional(&linear(n), 1.0 / n as f64, exps);
            assert_relative_eq!(v, 2.0 / (0.8 * 1.8), max_relative = 1e-6);
        }
    }

    #[test]
    fn functional_matches_brute_force() {
        // Dense tensor quadrature on a smooth exponent pair as an oracle.
        let vals = [0.0, 0.4, -0.1, 0.3, 0.8, 0.5];
        let n = vals.len() - 1;
        let dt = 0.2;
        let exps = GrrExponents::new(3.0, 0.5).unwrap();
        let f = |t: f64| {
            let x = t / dt;
            let k = (x.floor() as usize).min(n - 1);
            vals[k] + (x - k as f64) * (vals[k + 1] - vals[k])
        };
        let gl = GaussLegendre::new(20);
        let e = exps.beta * exps.q + 1.0;
        // Integrate over σ > τ with τ = σ − w, graded in w near 0.
        let upper = gl.integrate_composite(0.0, 1.0, 50, |s| {
            gl.integrate_composite(0.0, s.sqrt(), 20, |r| {
                let w = r * r;
                if w == 0.0 {
                    return 0.0;
                }
                (f(s) - f(s - w)).abs().powf(exps.q) / w.powf(e) * 2.0 * r
            })
        });
        let got = grr_functional(&vals, dt, exps);
        assert_relative_eq!(got, 2.0 * upper, max_relative = 1e-4);
    }

    #[test]
    fn functional_is_translation_invariant_and_zero_on_constants() {
        let grid = TimeGrid::new(1.0, 64).unwrap();
        let b = sample_fbm(0.75, grid, 4).unwrap();
        let exps = GrrExponents::for_increment_bound(0.75, 0.05).unwrap();
        let shifted: Vec<f64> = b.values.iter().map(|x| x + 3.5).collect();
        let a = grr_functional_ln(&b.values, grid.dt(), exps);
        let c = grr_functional_ln(&shifted, grid.dt(), exps);
        assert!(a.is_finite());
        assert_relative_eq!(a, c, max_relative = 1e-12);
        assert_eq!(grr_functional(&[1.0; 10], 0.1, exps), 0.0);
    }

    #[test]
    fn classical_constant_is_sufficient() {
        // On [0,1], c_T = 8·4^{1/q} is a valid constant.
        let grid = TimeGrid::new(1.0, 128).unwrap();
        for seed in 0..10 {
            let b = sample_fbm(0.75, grid, seed).unwrap();
            let exps = GrrExponents::for_increment_bound(0.75, 0.0125).unwrap();
            let c = 8.0 * 4f64.powf(1.0 / exps.q);
            let r = grr_check(&b.values, grid.dt(), exps, c).unwrap();
            assert!(r.pass, "ratio {}", r.max_ratio);
        }
        let exps = GrrExponents::new(2.0, 0.6).unwrap();
        let r = grr_check(&linear(64), 1.0 / 64.0, exps, 16.0).unwrap();
        assert!(r.pass);
    }

    #[test]
    fn constant_path_passes_trivially() {
        let exps = GrrExponents::new(2.0, 0.6).unwrap();
        let r = grr_check(&[0.3; 17], 1.0 / 16.0, exps, 1.0).unwrap();
        assert!(r.pass);
        assert_eq!(r.max_ratio, 0.0);
        assert_eq!(implied_c_t(&[0.3; 17], 1.0 / 16.0, exps), 0.0);
    }

    #[test]
    fn implied_constant_is_the_pass_threshold() {
        let exps = GrrExponents::new(2.0, 0.6).unwrap();
        let v = linear(32);
        let c = implied_c_t(&v, 1.0 / 32.0, exps);
        assert!(grr_check(&v, 1.0 / 32.0, exps, c * 1.0001).unwrap().pass);
        let fail = grr_check(&v, 1.0 / 32.0, exps, c * 0.9).unwrap();
        assert!(!fail.pass);
        assert!(fail.violations >= 1);
    }

    #[test]
    fn theta_of_constant_path_is_zero() {
        let grid = TimeGrid::new(1.0, 16).unwrap();
        let p = FbmPath { hurst: 0.7, grid, values: vec![0.0; 17], seed: 0 };
        assert_eq!(theta_estimate(&p, 0.05).unwrap(), 0.0);
    }

    #[test]
    fn exponent_validation() {
        assert!(GrrExponents::new(0.5, 3.0).is_err());
        assert!(GrrExponents::new(2.0, 0.4).is_err());
        assert!(GrrExponents::new(2.0, 1.2).is_err());
        let e = GrrExponents::for_increment_bound(0.8, 0.1).unwrap();
        assert_relative_eq!(e.beta * e.q + 1.0, 2.0 * 0.8 / 0.1, epsilon = 1e-12);
    }

    #[test]
    fn log_sum_is_stable() {
        let mut s = LogSum::new();
        for x in [1000.0, 1000.0, -5.0] {
            s.push(x);
        }
        assert_relative_eq!(s.value(), 1000.0 + 2f64.ln(), epsilon = 1e-12);
        assert_eq!(LogSum::new().value(), f64::NEG_INFINITY);
    }
}
