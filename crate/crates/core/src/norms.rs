//! Space-time norms of nodal fields and the empirical embedding constants.

use std::sync::Arc;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::domain::{check_field, HornGrid};
use crate::error::{domain, Result};
use crate::fbm::TimeGrid;
use crate::quadrature::{linear_power, GaussLegendre};
use crate::rng;

/// Nodal values on `grid × times`, linear in time between nodes.
#[derive(Debug, Clone)]
pub struct SpaceTimeField {
    pub grid: Arc<HornGrid>,
    pub times: TimeGrid,
    pub values: Vec<Vec<f64>>,
}

impl SpaceTimeField {
    pub fn new(grid: Arc<HornGrid>, times: TimeGrid, values: Vec<Vec<f64>>) -> Result<Self> {
        if values.len() != times.n_nodes() {
            return domain(format!("{} time slices for {} time nodes", values.len(), times.n_nodes()));
        }
        for v in &values {
            check_field(&grid, v)?;
            if v.iter().any(|x| !x.is_finite()) {
                return domain("space-time field has non-finite entries");
            }
        }
        Ok(SpaceTimeField { grid, times, values })
    }

    /// `w(x) η(t)`.
    pub fn tensor(grid: Arc<HornGrid>, times: TimeGrid, w: &[f64], eta: impl Fn(f64) -> f64) -> Result<Self> {
        let values = times.nodes().into_iter().map(|t| w.iter().map(|x| x * eta(t)).collect()).collect();
        Self::new(grid, times, values)
    }

    pub fn scaled(&self, c: f64) -> Self {
        let values = self.values.iter().map(|v| v.iter().map(|x| c * x).collect()).collect();
        SpaceTimeField { values, ..self.clone() }
    }

    pub fn sum(&self, other: &Self) -> Result<Self> {
        if self.times != other.times || self.values[0].len() != other.values[0].len() {
            return domain("space-time fields live on different grids");
        }
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a.iter().zip(b).map(|(x, y)| x + y).collect())
            .collect();
        Ok(SpaceTimeField { values, ..self.clone() })
    }

    fn l2_sq(&self, v: &[f64]) -> f64 {
        self.grid.nodes.iter().zip(v).map(|(n, x)| n.measure * x * x).sum()
    }

    fn diff_norm(&self, a: &[f64], b: &[f64]) -> f64 {
        self.grid.nodes.iter().zip(a.iter().zip(b)).map(|(n, (x, y))| n.measure * (x - y).powi(2)).sum::<f64>().sqrt()
    }
}

/// Time-interpolated spatial field at `t`.
pub fn trace_at(u: &SpaceTimeField, t: f64) -> Result<Vec<f64>> {
    let horizon = u.times.horizon();
    if !(0.0..=horizon).contains(&t) {
        return domain(format!("trace time {t} outside [0, {horizon}]"));
    }
    let (k, w) = locate(u.times, t);
    if w == 0.0 {
        return Ok(u.values[k].clone());
    }
    Ok(u.values[k].iter().zip(&u.values[k + 1]).map(|(a, b)| (1.0 - w) * a + w * b).collect())
}

/// Segment index and barycentric weight of `t`.
fn locate(tg: TimeGrid, t: f64) -> (usize, f64) {
    let s = t / tg.dt();
    let k = (s.floor() as usize).min(tg.n_steps());
    let w = s - k as f64;
    if k == tg.n_steps() || w <= 1e-14 {
        (k, 0.0)
    } else if w >= 1.0 - 1e-14 {
        (k + 1, 0.0)
    } else {
        (k, w)
    }
}

/// `∫_0^t ‖u(t) − u(τ)‖₂ / (t − τ)^{α+1} dτ`, with the distance replaced by
/// its linear interpolant in `τ` between time nodes.
fn inner_integral(u: &SpaceTimeField, t: f64, alpha: f64) -> f64 {
    let dt = u.times.dt();
    let ut = trace_at(u, t).expect("t inside the horizon");
    let (k, w) = locate(u.times, t);
    // Nodes strictly before t.
    let last = if w == 0.0 { k } else { k + 1 };
    if last == 0 {
        return 0.0;
    }
    let d: Vec<f64> = (0..last).map(|m| u.diff_norm(&ut, &u.values[m])).collect();
    let mut total = 0.0;
    for m in 0..last - 1 {
        // s = t − τ runs over [t − τ_{m+1}, t − τ_m].
        let a = t - u.times.node(m + 1);
        let b = t - u.times.node(m);
        let slope = (d[m] - d[m + 1]) / dt;
        let c0 = d[m + 1] - slope * a;
        total += linear_power(c0, slope, a, b, -alpha - 1.0);
    }
    // Final piece [τ_{last−1}, t] where the distance falls to zero at τ = t.
    let gap = t - u.times.node(last - 1);
    total += d[last - 1] / gap * gap.powf(1.0 - alpha) / (1.0 - alpha);
    total
}

const OUTER_NODES: usize = 6;

/// `‖u‖_{α,2,T}`: the square root of
/// `sup_t ‖u(t)‖₂² + ∫_0^T (∫_0^t ‖u(t) − u(τ)‖₂ (t − τ)^{−α−1} dτ)² dt`.
pub fn balpha_norm(u: &SpaceTimeField, alpha: f64) -> Result<f64> {
    Ok(balpha_parts(u, alpha)?.0.sqrt())
}

/// `(norm², sup part, increment part)`.
pub fn balpha_parts(u: &SpaceTimeField, alpha: f64) -> Result<(f64, f64, f64)> {
    if !(alpha > 0.0 && alpha < 0.5) {
        return domain(format!("alpha = {alpha} outside (0, 1/2)"));
    }
    // ‖u(t)‖² is convex along each linear segment, so the sup sits at a node.
    let sup = u.values.iter().map(|v| u.l2_sq(v)).fold(0.0, f64::max);
    let gl = GaussLegendre::new(OUTER_NODES);
    let tg = u.times;
    let increment: f64 = (0..tg.n_steps())
        .map(|m| gl.on(tg.node(m), tg.node(m + 1)).map(|(t, w)| w * inner_integral(u, t, alpha).powi(2)).sum::<f64>())
        .sum();
    Ok((sup + increment, sup, increment))
}

/// Discrete `‖u‖_{1,2,T}`: `∫_0^T (‖u‖₂² + |u|²_{H¹} + ‖∂_t u‖₂²) dt`, exact for
/// the time-linear interpolant.
pub fn tensor_h1_norm(u: &SpaceTimeField) -> f64 {
    let dt = u.times.dt();
    let g = &u.grid;
    let inner = |a: &[f64], b: &[f64]| -> f64 { g.nodes.iter().zip(a.iter().zip(b)).map(|(n, (x, y))| n.measure * x * y).sum() };
    let form = |a: &[f64], b: &[f64]| -> f64 {
        g.faces.iter().map(|f| f.geometric_transmissibility() * (a[f.a] - a[f.b]) * (b[f.a] - b[f.b])).sum()
    };
    let mut total = 0.0;
    for w in u.values.windows(2) {
        let (a, b) = (&w[0], &w[1]);
        total += dt / 3.0 * (inner(a, a) + inner(a, b) + inner(b, b));
        total += dt / 3.0 * (form(a, a) + form(a, b) + form(b, b));
        total += u.diff_norm(a, b).powi(2) / dt;
    }
    total.sqrt()
}

/// `max ‖u(t) − u(τ)‖₂ / ((t − τ)^{1/2} ‖u‖_{1,2,T})` over node pairs.
pub fn increment_ratio(u: &SpaceTimeField) -> f64 {
    let norm = tensor_h1_norm(u);
    if norm == 0.0 {
        return 0.0;
    }
    let tg = u.times;
    let mut worst = 0.0f64;
    for n in 1..tg.n_nodes() {
        for m in 0..n {
            let gap = tg.node(n) - tg.node(m);
            worst = worst.max(u.diff_norm(&u.values[n], &u.values[m]) / (gap.sqrt() * norm));
        }
    }
    worst
}

/// Bound on `‖u‖_{α,2,T} / ‖u‖_{1,2,T}` from `sup ‖u(t)‖² ≤ coth(T) ‖u‖²` and
/// `‖u(t) − u(τ)‖₂ ≤ (t − τ)^{1/2} ‖u‖_{1,2,T}`.
pub fn analytic_embedding_constant(alpha: f64, horizon: f64) -> f64 {
    let coth = 1.0 / horizon.tanh();
    let a = 0.5 - alpha;
    (coth + horizon.powf(2.0 - 2.0 * alpha) / (a * a * (2.0 - 2.0 * alpha))).sqrt()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingReport {
    pub alpha: f64,
    /// `max balpha_norm / tensor_h1_norm`.
    pub c_emp: f64,
    pub analytic: f64,
    /// `max ‖u(t)‖₂ / ‖u‖_{1,2,T}` over members and time nodes.
    pub trace_constant: f64,
    pub max_increment_ratio: f64,
    pub ratios: Vec<f64>,
    pub skipped: Vec<usize>,
    pub notes: Vec<String>,
}

impl EmbeddingReport {
    /// Increment bound holds and every ratio sits under the analytic chain.
    pub fn consistent(&self) -> bool {
        self.max_increment_ratio <= 1.0 + 1e-12 && self.c_emp <= self.analytic
    }
}

pub fn embedding_check(corpus: &[SpaceTimeField], alpha: f64) -> Result<EmbeddingReport> {
    if corpus.is_empty() {
        return domain("embedding corpus is empty");
    }
    let rows: Vec<Result<Option<(f64, f64, f64)>>> = corpus
        .par_iter()
        .map(|u| {
            let h1 = tensor_h1_norm(u);
            if h1 == 0.0 {
                return Ok(None);
            }
            let b = balpha_norm(u, alpha)?;
            let trace = u.values.iter().map(|v| u.l2_sq(v).sqrt()).fold(0.0, f64::max) / h1;
            Ok(Some((b / h1, trace, increment_ratio(u))))
        })
        .collect();
    let mut ratios = Vec::new();
    let mut skipped = Vec::new();
    let mut notes = Vec::new();
    let (mut trace_constant, mut inc) = (0.0f64, 0.0f64);
    for (i, r) in rows.into_iter().enumerate() {
        match r? {
            Some((ratio, trace, incr)) => {
                ratios.push(ratio);
                trace_constant = trace_constant.max(trace);
                inc = inc.max(incr);
            }
            None => {
                skipped.push(i);
                notes.push(format!("member {i} has zero tensor norm"));
            }
        }
    }
    let horizon = corpus[0].times.horizon();
    Ok(EmbeddingReport {
        alpha,
        c_emp: ratios.iter().copied().fold(0.0, f64::max),
        analytic: analytic_embedding_constant(alpha, horizon),
        trace_constant,
        max_increment_ratio: inc,
        ratios,
        skipped,
        notes,
    })
}

/// Seeded tensor-product fields `w ⊗ η`.
///
/// `w` mixes a constant, the axial coordinate and a transverse cosine, and
/// every fourth member is constant in space; `η` is a constant plus a
/// sinusoid of frequency up to 3 cycles over the horizon.
pub fn tensor_corpus(grid: &Arc<HornGrid>, times: TimeGrid, count: usize, seed: u64) -> Result<Vec<SpaceTimeField>> {
    let axial = grid.axial_axis();
    let d = grid.dimension;
    let horizon = times.horizon();
    (0..count)
        .map(|i| {
            let mut r = rng::rng(rng::sub_seed(seed, i as u64));
            let mut c: [f64; 3] = [r.random_range(-1.0..1.0), r.random_range(-1.0..1.0), r.random_range(-1.0..1.0)];
            if i % 4 == 0 {
                c = [1.0, 0.0, 0.0];
            }
            let kx: f64 = r.random_range(0.5..3.0);
            let w: Vec<f64> = grid
                .nodes
                .iter()
                .map(|n| {
                    let x = n.position[axial];
                    let y = n.position[(axial + 1) % d];
                    c[0] + c[1] * x + c[2] * (kx * std::f64::consts::PI * y).cos()
                })
                .collect();
            let (a0, a1): (f64, f64) = (r.random_range(-1.0..1.0), r.random_range(-1.0..1.0));
            let f: f64 = r.random_range(0.0..3.0);
            let ph: f64 = r.random_range(0.0..std::f64::consts::TAU);
            let eta = move |t: f64| a0 + a1 * (std::f64::consts::TAU * f * t / horizon + ph).sin();
            SpaceTimeField::tensor(Arc::clone(grid), times, &w, eta)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{build_grid, BoundaryCurve};
    use approx::assert_relative_eq;

    fn grid() -> Arc<HornGrid> {
        Arc::new(build_grid(&BoundaryCurve::gaussian(), 2, 3.0, 0.15).unwrap())
    }

    fn probe(g: &HornGrid) -> Vec<f64> {
        g.nodes.iter().map(|n| 1.0 + n.position[0] - 0.5 * n.position[1].powi(2)).collect()
    }

    fn l2(g: &HornGrid, w: &[f64]) -> f64 {
        crate::domain::l2_norm(g, w).unwrap()
    }

    #[test]
    fn time_constant_field() {
        let g = grid();
        let w = probe(&g);
        let u = SpaceTimeField::tensor(Arc::clone(&g), TimeGrid::new(1.0, 8).unwrap(), &w, |_| 1.0).unwrap();
        assert_relative_eq!(balpha_norm(&u, 0.3).unwrap(), l2(&g, &w), max_relative = 1e-14);
    }

    #[test]
    fn linear_in_time_closed_form() {
        let g = grid();
        let w = probe(&g);
        let nw = l2(&g, &w);
        for (t_end, alpha) in [(1.0, 0.3), (2.0, 0.45), (0.5, 0.1)] {
            let u = SpaceTimeField::tensor(Arc::clone(&g), TimeGrid::new(t_end, 16).unwrap(), &w, |t| t).unwrap();
            let a: f64 = alpha;
            let want = t_end * t_end * nw * nw + nw * nw * t_end.powf(3.0 - 2.0 * a) / ((1.0 - a).powi(2) * (3.0 - 2.0 * a));
            assert_relative_eq!(balpha_norm(&u, alpha).unwrap().powi(2), want, max_relative = 1e-6);
        }
        let u = SpaceTimeField::tensor(Arc::clone(&g), TimeGrid::new(1.0, 4).unwrap(), &w, |t| t).unwrap();
        assert!(balpha_norm(&u, 0.5).is_err());
        assert!(balpha_norm(&u, 0.0).is_err());
    }

    #[test]
    fn balpha_grows_with_alpha() {
        let g = grid();
        let w = probe(&g);
        let u = SpaceTimeField::tensor(Arc::clone(&g), TimeGrid::new(1.0, 32).unwrap(), &w, |t| (5.0 * t).sin()).unwrap();
        let vals: Vec<f64> = [0.05, 0.15, 0.25, 0.35, 0.45, 0.49].iter().map(|&a| balpha_norm(&u, a).unwrap()).collect();
        assert!(vals.windows(2).all(|p| p[1] > p[0]), "{vals:?}");
    }

    #[test]
    fn tensor_norm_examples() {
        let g = grid();
        let tg = TimeGrid::new(2.0, 10).unwrap();
        let ones = vec![1.0; g.n_nodes()];
        let u = SpaceTimeField::tensor(Arc::clone(&g), tg, &ones, |_| 1.0).unwrap();
        assert_relative_eq!(tensor_h1_norm(&u), (g.measure_total * 2.0).sqrt(), max_relative = 1e-13);

        // η piecewise linear through its node values, so both integrals are exact.
        let eta = |t: f64| (1.3 * t).cos() + t * t;
        let u = SpaceTimeField::tensor(Arc::clone(&g), tg, &ones, eta).unwrap();
        let e: Vec<f64> = tg.nodes().iter().map(|&t| eta(t)).collect();
        let dt = tg.dt();
        let l2e: f64 = e.windows(2).map(|p| dt / 3.0 * (p[0] * p[0] + p[0] * p[1] + p[1] * p[1])).sum();
        let d1e: f64 = e.windows(2).map(|p| (p[1] - p[0]).powi(2) / dt).sum();
        assert_relative_eq!(tensor_h1_norm(&u).powi(2), g.measure_total * (l2e + d1e), max_relative = 1e-13);
    }

    #[test]
    fn tensor_norm_matches_direct_summation() {
        let g = grid();
        let tg = TimeGrid::new(1.0, 6).unwrap();
        let mut r = rng::rng(3);
        let values: Vec<Vec<f64>> =
            (0..tg.n_nodes()).map(|_| (0..g.n_nodes()).map(|_| r.random_range(-1.0..1.0)).collect()).collect();
        let u = SpaceTimeField::new(Arc::clone(&g), tg, values.clone()).unwrap();
        // Midpoint-and-endpoint Simpson rule is exact for the quadratic integrands.
        let dt = tg.dt();
        let mut want = 0.0;
        for n in 0..tg.n_steps() {
            let (a, b) = (&values[n], &values[n + 1]);
            let mid: Vec<f64> = a.iter().zip(b).map(|(x, y)| 0.5 * (x + y)).collect();
            let point = |v: &[f64]| -> f64 {
                let mut s = 0.0;
                for (i, node) in g.nodes.iter().enumerate() {
                    s += node.measure * v[i] * v[i];
                }
                for f in &g.faces {
                    s += f.aperture / f.distance * (v[f.a] - v[f.b]).powi(2);
                }
                s
            };
            want += dt / 6.0 * (point(a) + 4.0 * point(&mid) + point(b));
            for (i, node) in g.nodes.iter().enumerate() {
                want += node.measure * ((b[i] - a[i]) / dt).powi(2) * dt;
            }
        }
        assert_relative_eq!(tensor_h1_norm(&u).powi(2), want, max_relative = 1e-12);
    }

    #[test]
    fn norm_axioms() {
        let g = grid();
        let tg = TimeGrid::new(1.0, 8).unwrap();
        let corpus = tensor_corpus(&g, tg, 9, 5).unwrap();
        for w in corpus.windows(3) {
            let (a, b) = (&w[0], &w[1]);
            let c = -2.7;
            assert_relative_eq!(tensor_h1_norm(&a.scaled(c)), c.abs() * tensor_h1_norm(a), max_relative = 1e-10);
            assert_relative_eq!(
                balpha_norm(&a.scaled(c), 0.3).unwrap(),
                c.abs() * balpha_norm(a, 0.3).unwrap(),
                max_relative = 1e-10
            );
            let s = a.sum(b).unwrap();
            assert!(tensor_h1_norm(&s) <= (tensor_h1_norm(a) + tensor_h1_norm(b)) * (1.0 + 1e-10));
            assert!(balpha_norm(&s, 0.3).unwrap() <= (balpha_norm(a, 0.3).unwrap() + balpha_norm(b, 0.3).unwrap()) * (1.0 + 1e-10));
        }
    }

    #[test]
    fn traces() {
        let g = grid();
        let tg = TimeGrid::new(1.0, 4).unwrap();
        let u = &tensor_corpus(&g, tg, 1, 8).unwrap()[0];
        assert_eq!(trace_at(u, 0.5).unwrap(), u.values[2]);
        let mid = trace_at(u, 0.125).unwrap();
        for (i, m) in mid.iter().enumerate() {
            assert_relative_eq!(*m, 0.5 * (u.values[0][i] + u.values[1][i]), max_relative = 1e-14);
        }
        assert!(trace_at(u, 1.0 + 1e-9).is_err());
        assert!(trace_at(u, -0.1).is_err());
    }

    #[test]
    fn embedding_report() {
        let g = grid();
        let tg = TimeGrid::new(1.0, 16).unwrap();
        let mut corpus = tensor_corpus(&g, tg, 12, 1).unwrap();
        corpus.push(corpus[0].scaled(0.0));
        let rep = embedding_check(&corpus, 0.3).unwrap();
        assert_eq!(rep.skipped, vec![12]);
        assert_eq!(rep.ratios.len(), 12);
        assert!(rep.consistent(), "{rep:?}");
        assert!(rep.trace_constant <= (1.0f64 / 1.0f64.tanh()).sqrt());
        assert!(embedding_check(&[], 0.3).is_err());

        // u = t w: the ratio is a quotient of closed forms.
        let w = probe(&g);
        let u = SpaceTimeField::tensor(Arc::clone(&g), tg, &w, |t| t).unwrap();
        let nw = l2(&g, &w);
        let semi = crate::domain::h1_seminorm(&g, &w).unwrap();
        let a: f64 = 0.3;
        let b2 = nw * nw * (1.0 + 1.0 / ((1.0 - a).powi(2) * (3.0 - 2.0 * a)));
        let h2 = (nw * nw + semi * semi) / 3.0 + nw * nw;
        let rep = embedding_check(&[u], a).unwrap();
        assert_relative_eq!(rep.c_emp, (b2 / h2).sqrt(), max_relative = 1e-6);
    }
}
