use std::sync::Arc;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{CoefficientField, NonlinearitySpec};
use crate::domain::{check_field, h1_seminorm, l2_inner, l2_norm, HornGrid};
use crate::error::{domain, Error, Result};
use crate::linalg::{pcg, CsrMatrix, SolveStats};
use crate::rng;
use crate::spectral::{evaluate_noise_field, NoiseIncrementSet, SpectralBasis};
use crate::young::young_sum;

/// Discrete `div(k ∇·)` with Neumann conditions, in flux form: `stiffness`
/// is symmetric, negative semidefinite and has zero row sums; the operator
/// acting on nodal values is `M^{−1} · stiffness`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiffusionOperator {
    pub stiffness: CsrMatrix,
    pub mass: Vec<f64>,
    pub time: f64,
}

impl DiffusionOperator {
    /// `stiffness · u`.
    pub fn apply(&self, u: &[f64]) -> Vec<f64> {
        self.stiffness.mul_vec(u)
    }

    /// `−(A w, w) = Σ_f T_f(k) (w_a − w_b)²`.
    pub fn energy(&self, w: &[f64]) -> f64 {
        -self.stiffness.form(w, w)
    }
}

/// Assembles the two-point flux operator at time `t`, with face
/// transmissibilities from the harmonic mean of the normal conductivity at
/// the two adjacent nodes.
pub fn assemble_operator(grid: &HornGrid, k: &CoefficientField, t: f64) -> Result<DiffusionOperator> {
    let d = grid.dimension;
    k.validate(d)?;
    for node in &grid.nodes {
        k.check_ellipticity(&node.position[..d], t, d)?;
    }
    let mut trip = Vec::with_capacity(4 * grid.faces.len());
    for f in &grid.faces {
        let ka = k.normal_component(&grid.nodes[f.a].position, t, f.axis, d);
        let kb = k.normal_component(&grid.nodes[f.b].position, t, f.axis, d);
        let tr = 2.0 * ka * kb / (ka + kb) * f.geometric_transmissibility();
        trip.push((f.a, f.a, -tr));
        trip.push((f.b, f.b, -tr));
        trip.push((f.a, f.b, tr));
        trip.push((f.b, f.a, tr));
    }
    // Isolated nodes still need a diagonal slot.
    for i in 0..grid.n_nodes() {
        trip.push((i, i, 0.0));
    }
    Ok(DiffusionOperator { stiffness: CsrMatrix::from_triplets(grid.n_nodes(), trip), mass: grid.masses(), time: t })
}

/// `M − dt · stiffness`, the matrix of one implicit diffusion step.
#[derive(Debug, Clone)]
pub struct ImplicitSystem {
    pub matrix: CsrMatrix,
    pub mass: Vec<f64>,
    pub dt: f64,
    pub tolerance: f64,
}

impl ImplicitSystem {
    pub fn new(op: &DiffusionOperator, dt: f64, tolerance: f64) -> Self {
        ImplicitSystem { matrix: op.stiffness.shifted(&op.mass, 1.0, -dt), mass: op.mass.clone(), dt, tolerance }
    }

    /// Solves `(I − dt A) u = w` for `u`, then shifts `u` by the constant
    /// that makes `Σ M u = Σ M w` hold to rounding. Constants lie in the
    /// kernel of `A`, so the shift does not change the diffusion term.
    pub fn solve(&self, w: &[f64], guess: &[f64]) -> Result<(Vec<f64>, SolveStats)> {
        let rhs: Vec<f64> = w.iter().zip(&self.mass).map(|(a, m)| a * m).collect();
        let mut u = guess.to_vec();
        let stats = pcg(&self.matrix, &rhs, &mut u, self.tolerance, 20 * self.matrix.n + 100)?;
        let total: f64 = self.mass.iter().sum();
        let target: f64 = rhs.iter().sum();
        let have: f64 = u.iter().zip(&self.mass).map(|(a, m)| a * m).sum();
        let c = (target - have) / total;
        u.iter_mut().for_each(|v| *v += c);
        Ok((u, stats))
    }
}

/// One semi-implicit step:
/// `(I − dt A(t_{n+1})) u_{n+1} = u_n + dt g(u_n) + h(u_n) ⊙ ΔW_n`.
pub fn step(u: &[f64], system: &ImplicitSystem, nl: &NonlinearitySpec, dw: &[f64]) -> Result<Vec<f64>> {
    let w: Vec<f64> = u
        .iter()
        .zip(dw)
        .map(|(&x, &d)| x + system.dt * nl.g.eval(x) + nl.h.eval(x) * d)
        .collect();
    Ok(system.solve(&w, &w)?.0)
}

/// Deterministic or seeded initial data.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum InitialCondition {
    Constant { value: f64 },
    /// `amplitude · e_index` (1-based Neumann eigenvector).
    Mode { index: usize, amplitude: f64 },
    /// `amplitude · exp(−|x − c|²/(2 w²))`
    Bump { center: [f64; 3], width: f64, amplitude: f64 },
    /// `amplitude · Σ ξ_i √λ_i e_i` with independent standard normal `ξ_i`.
    Random { amplitude: f64 },
}

impl InitialCondition {
    pub fn realize(&self, grid: &HornGrid, basis: &SpectralBasis, seed: u64) -> Result<Vec<f64>> {
        let n = grid.n_nodes();
        let d = grid.dimension;
        let field = match *self {
            InitialCondition::Constant { value } => vec![value; n],
            InitialCondition::Mode { index, amplitude } => {
                if index == 0 || index > basis.len() {
                    return domain(format!("initial mode {index} not among the {} retained modes", basis.len()));
                }
                basis.vectors[index - 1].iter().map(|v| amplitude * v).collect()
            }
            InitialCondition::Bump { center, width, amplitude } => grid
                .nodes
                .iter()
                .map(|x| {
                    let r2: f64 = (0..d).map(|k| (x.position[k] - center[k]).powi(2)).sum();
                    amplitude * (-r2 / (2.0 * width * width)).exp()
                })
                .collect(),
            InitialCondition::Random { amplitude } => {
                let mut r = rng::rng(rng::derive_seed(seed, &[rng::stream::INITIAL]));
                let mut field = vec![0.0; n];
                for i in 0..basis.len() {
                    let xi: f64 = r.sample(StandardNormal);
                    let c = amplitude * xi * basis.eigenvalues[i].sqrt();
                    for (f, e) in field.iter_mut().zip(&basis.vectors[i]) {
                        *f += c * e;
                    }
                }
                field
            }
        };
        if field.len() != n || field.iter().any(|v| !v.is_finite()) {
            return Err(Error::Config("initial condition has non-finite entries".into()));
        }
        Ok(field)
    }
}

/// Everything needed to run the scheme on one noise path.
#[derive(Debug, Clone)]
pub struct Problem {
    pub grid: Arc<HornGrid>,
    pub coefficient: CoefficientField,
    pub nonlinearity: NonlinearitySpec,
    pub initial: Vec<f64>,
    pub noise: NoiseIncrementSet,
    pub tolerance: f64,
}

impl Problem {
    pub fn validate(&self) -> Result<()> {
        check_field(&self.grid, &self.initial)?;
        check_field(&self.grid, &self.noise.basis.masses)?;
        if self.initial.iter().any(|v| !v.is_finite()) {
            return Err(Error::Config("initial condition has non-finite entries".into()));
        }
        self.coefficient.validate(self.grid.dimension)?;
        if !(self.tolerance > 0.0 && self.tolerance < 1e-6) {
            return Err(Error::Config(format!("solver tolerance {} outside (0, 1e-6)", self.tolerance)));
        }
        Ok(())
    }

    /// Same problem on `factor`-times finer time steps over the same path.
    pub fn refined_in_time(&self, factor: usize) -> Problem {
        Problem { noise: self.noise.subdivided(factor), ..self.clone() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "state", rename_all = "kebab-case")]
pub enum TrajectoryStatus {
    Complete,
    Aborted { step: usize, reason: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolutionTrajectory {
    pub times: Vec<f64>,
    pub fields: Vec<Vec<f64>>,
    pub l2_norms: Vec<f64>,
    pub h1_seminorms: Vec<f64>,
    pub seed: u64,
    pub fingerprint: Option<String>,
    pub status: TrajectoryStatus,
}

impl SolutionTrajectory {
    pub fn is_complete(&self) -> bool {
        self.status == TrajectoryStatus::Complete
    }

    pub fn final_field(&self) -> &[f64] {
        self.fields.last().expect("trajectory holds the initial field")
    }
}

/// Operators at every time node, shared when the coefficient is static.
struct OperatorCache {
    ops: Vec<Arc<DiffusionOperator>>,
}

impl OperatorCache {
    fn new(p: &Problem) -> Result<Self> {
        let tg = p.noise.grid;
        let ops = if p.coefficient.is_time_dependent() {
            (0..=tg.n_steps())
                .map(|n| assemble_operator(&p.grid, &p.coefficient, tg.node(n)).map(Arc::new))
                .collect::<Result<Vec<_>>>()?
        } else {
            let shared = Arc::new(assemble_operator(&p.grid, &p.coefficient, 0.0)?);
            vec![shared; tg.n_steps() + 1]
        };
        Ok(OperatorCache { ops })
    }

    fn at(&self, n: usize) -> &DiffusionOperator {
        &self.ops[n]
    }
}

fn record(grid: &HornGrid, traj: &mut SolutionTrajectory, t: f64, u: Vec<f64>) -> Result<()> {
    traj.times.push(t);
    traj.l2_norms.push(l2_norm(grid, &u)?);
    traj.h1_seminorms.push(h1_seminorm(grid, &u)?);
    traj.fields.push(u);
    Ok(())
}

/// Runs the semi-implicit scheme over the whole time grid.
///
/// Invalid input is an error; a failure during stepping returns the partial
/// trajectory marked as aborted.
pub fn solve(p: &Problem) -> Result<SolutionTrajectory> {
    p.validate()?;
    let tg = p.noise.grid;
    let dt = tg.dt();
    let ops = OperatorCache::new(p)?;
    let mut traj = SolutionTrajectory {
        times: Vec::with_capacity(tg.n_nodes()),
        fields: Vec::with_capacity(tg.n_nodes()),
        l2_norms: Vec::new(),
        h1_seminorms: Vec::new(),
        seed: p.noise.seed,
        fingerprint: None,
        status: TrajectoryStatus::Complete,
    };
    record(&p.grid, &mut traj, 0.0, p.initial.clone())?;
    let mut system: Option<(usize, ImplicitSystem)> = None;
    for n in 0..tg.n_steps() {
        let op = ops.at(n + 1);
        let reuse = matches!(&system, Some((k, _)) if !p.coefficient.is_time_dependent() && *k == 0);
        if !reuse {
            system = Some((if p.coefficient.is_time_dependent() { n + 1 } else { 0 }, ImplicitSystem::new(op, dt, p.tolerance)));
        }
        let sys = &system.as_ref().unwrap().1;
        let outcome = evaluate_noise_field(&p.noise, n).and_then(|dw| step(traj.final_field(), sys, &p.nonlinearity, &dw));
        match outcome {
            Ok(u) if u.iter().all(|v| v.is_finite()) => record(&p.grid, &mut traj, tg.node(n + 1), u)?,
            Ok(_) => {
                traj.status = TrajectoryStatus::Aborted { step: n, reason: "non-finite values".into() };
                break;
            }
            Err(e) => {
                traj.status = TrajectoryStatus::Aborted { step: n, reason: e.to_string() };
                break;
            }
        }
    }
    Ok(traj)
}

/// Time factor `η` of a tensor-product test function, linear between nodes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum TimeProfile {
    Constant { value: f64 },
    /// `η(t) = a + b t`
    Linear { intercept: f64, slope: f64 },
    /// Values at the time nodes.
    Nodal { values: Vec<f64> },
}

impl TimeProfile {
    fn nodal(&self, times: &[f64]) -> Result<Vec<f64>> {
        match self {
            TimeProfile::Constant { value } => Ok(vec![*value; times.len()]),
            TimeProfile::Linear { intercept, slope } => Ok(times.iter().map(|t| intercept + slope * t).collect()),
            TimeProfile::Nodal { values } => {
                if values.len() < times.len() {
                    return domain("time profile shorter than the trajectory");
                }
                Ok(values[..times.len()].to_vec())
            }
        }
    }
}

/// Terms of the variational identity, tested against `v ⊗ η` up to `t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResidualTerms {
    /// `(v(t), u(t)) − (v(0), φ)`
    pub boundary: f64,
    /// `∫ (v_τ, u)`
    pub time_derivative: f64,
    /// `∫ Σ (v_{x_i}, k_{ij} u_{x_j})`
    pub diffusion: f64,
    /// `∫ (v, g(u))`
    pub reaction: f64,
    /// `Σ_i ∫ (v, h(u) √λ_i e_i) dB^{H_i}`
    pub stochastic: f64,
    pub residual: f64,
}

/// Signed residual of the variational identity for `v = v_spatial ⊗ η`.
///
/// Deterministic time integrals use the trapezoidal rule, which is exact for
/// the time-linear interpolant in the `(v_τ, u)` term. The stochastic term is
/// the left-point Young sum of `f_i(τ) = (v(τ), h(u(τ)) √λ_i e_i)`.
pub fn variational_residual(
    traj: &SolutionTrajectory,
    p: &Problem,
    v_spatial: &[f64],
    eta: &TimeProfile,
    t: f64,
) -> Result<ResidualTerms> {
    check_field(&p.grid, v_spatial)?;
    let tg = p.noise.grid;
    let last = tg.node_index(t)?;
    if last >= traj.fields.len() {
        return domain(format!("trajectory ends before t = {t}"));
    }
    let dt = tg.dt();
    let times: Vec<f64> = (0..=last).map(|n| tg.node(n)).collect();
    let eta = eta.nodal(&times)?;
    let g = &p.grid;
    let vu: Vec<f64> = (0..=last).map(|n| l2_inner(g, v_spatial, &traj.fields[n])).collect::<Result<_>>()?;

    let boundary = eta[last] * vu[last] - eta[0] * l2_inner(g, v_spatial, &p.initial)?;
    let mut time_derivative = 0.0;
    for n in 0..last {
        time_derivative += (eta[n + 1] - eta[n]) * 0.5 * (vu[n] + vu[n + 1]);
    }

    let ops = OperatorCache::new(p)?;
    let diff_at = |n: usize| -> f64 { -ops.at(n).stiffness.form(v_spatial, &traj.fields[n]) };
    let react_at = |n: usize| -> Result<f64> { l2_inner(g, v_spatial, &p.nonlinearity.g.apply(&traj.fields[n])) };
    let mut diffusion = 0.0;
    let mut reaction = 0.0;
    for n in 0..last {
        diffusion += 0.5 * dt * (eta[n] * diff_at(n) + eta[n + 1] * diff_at(n + 1));
        reaction += 0.5 * dt * (eta[n] * react_at(n)? + eta[n + 1] * react_at(n + 1)?);
    }

    let basis = &p.noise.basis;
    let mut stochastic = 0.0;
    let hv: Vec<Vec<f64>> = (0..last)
        .map(|n| {
            p.nonlinearity.h.apply(&traj.fields[n]).iter().zip(v_spatial).map(|(a, b)| a * b).collect()
        })
        .collect();
    for i in 0..p.noise.n_modes() {
        let scaled = basis.scaled_mode(i);
        let f: Vec<f64> = (0..last).map(|n| eta[n] * l2_inner(g, &hv[n], &scaled).unwrap_or(0.0)).collect();
        let path = p.noise.path(i);
        stochastic += young_sum(&f, &path, 0, last);
    }
    let residual = boundary - time_derivative + diffusion - reaction - stochastic;
    Ok(ResidualTerms { boundary, time_derivative, diffusion, reaction, stochastic, residual })
}

/// Fully implicit step iterated to a fixed point:
/// `(I − dt A) u = u_n + dt g(u) + h(u) ⊙ ΔW_n`.
fn implicit_step(
    u: &[f64],
    system: &ImplicitSystem,
    nl: &NonlinearitySpec,
    dw: &[f64],
    grid: &HornGrid,
    tol: f64,
    max_iter: usize,
) -> Result<(Vec<f64>, usize)> {
    let mut cur = step(u, system, nl, dw)?;
    for it in 1..=max_iter {
        let w: Vec<f64> = u
            .iter()
            .zip(&cur)
            .zip(dw)
            .map(|((&x, &y), &d)| x + system.dt * nl.g.eval(y) + nl.h.eval(y) * d)
            .collect();
        let next = system.solve(&w, &cur)?.0;
        let diff: Vec<f64> = next.iter().zip(&cur).map(|(a, b)| a - b).collect();
        let change = l2_norm(grid, &diff)?;
        let scale = l2_norm(grid, &next)?.max(1.0);
        cur = next;
        if change <= tol * scale {
            return Ok((cur, it));
        }
    }
    Err(Error::Solve { iterations: max_iter, residual: f64::NAN })
}

/// Runs the fully implicit fixed-point scheme.
pub fn solve_implicit(p: &Problem, fixed_point_tol: f64) -> Result<SolutionTrajectory> {
    p.validate()?;
    let tg = p.noise.grid;
    let ops = OperatorCache::new(p)?;
    let mut traj = SolutionTrajectory {
        times: Vec::new(),
        fields: Vec::new(),
        l2_norms: Vec::new(),
        h1_seminorms: Vec::new(),
        seed: p.noise.seed,
        fingerprint: None,
        status: TrajectoryStatus::Complete,
    };
    record(&p.grid, &mut traj, 0.0, p.initial.clone())?;
    let static_system = if p.coefficient.is_time_dependent() {
        None
    } else {
        Some(ImplicitSystem::new(ops.at(0), tg.dt(), p.tolerance))
    };
    for n in 0..tg.n_steps() {
        let owned;
        let sys = match &static_system {
            Some(s) => s,
            None => {
                owned = ImplicitSystem::new(ops.at(n + 1), tg.dt(), p.tolerance);
                &owned
            }
        };
        let dw = evaluate_noise_field(&p.noise, n)?;
        match implicit_step(traj.final_field(), sys, &p.nonlinearity, &dw, &p.grid, fixed_point_tol, 500) {
            Ok((u, _)) => record(&p.grid, &mut traj, tg.node(n + 1), u)?,
            Err(e) => {
                traj.status = TrajectoryStatus::Aborted { step: n, reason: e.to_string() };
                break;
            }
        }
    }
    Ok(traj)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UniquenessReport {
    pub h_affine: bool,
    pub steps: Vec<usize>,
    /// `max_n ‖u_semi(t_n) − u_impl(t_n)‖₂` per level.
    pub distances: Vec<f64>,
    /// `distance[l] / distance[l+1]`.
    pub ratios: Vec<f64>,
    pub conclusive: bool,
    pub note: Option<String>,
}

/// Sup-in-time `L²` distance between two trajectories on the same grid.
pub fn sup_l2_distance(grid: &HornGrid, a: &SolutionTrajectory, b: &SolutionTrajectory) -> Result<f64> {
    let mut worst = 0.0f64;
    for (x, y) in a.fields.iter().zip(&b.fields) {
        let d: Vec<f64> = x.iter().zip(y).map(|(p, q)| p - q).collect();
        worst = worst.max(l2_norm(grid, &d)?);
    }
    Ok(worst)
}

/// Compares the semi-implicit and fully implicit schemes on the same noise
/// path at `levels` successive halvings of the time step.
pub fn uniqueness_probe(p: &Problem, levels: usize, fixed_point_tol: f64) -> Result<UniquenessReport> {
    if levels < 2 {
        return domain("uniqueness probe needs at least two levels");
    }
    let mut steps = Vec::new();
    let mut distances = Vec::new();
    let mut note = None;
    for l in 0..levels {
        let q = p.refined_in_time(1 << l);
        let a = solve(&q)?;
        let b = solve_implicit(&q, fixed_point_tol)?;
        if !a.is_complete() || !b.is_complete() {
            note = Some(format!("level {l}: a scheme did not complete ({:?}, {:?})", a.status, b.status));
            break;
        }
        steps.push(q.noise.grid.n_steps());
        distances.push(sup_l2_distance(&p.grid, &a, &b)?);
    }
    let ratios = distances.windows(2).map(|w| w[0] / w[1]).collect();
    let h_affine = p.nonlinearity.h.is_affine();
    if !h_affine && note.is_none() {
        note = Some("h is not affine: uniqueness is not claimed, distances are descriptive".into());
    }
    Ok(UniquenessReport { h_affine, steps, conclusive: distances.len() == levels, distances, ratios, note })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{build_grid, BoundaryCurve};
    use crate::fbm::{HurstSequence, TimeGrid};
    use crate::spectral::{build_basis, sample_noise};
    use super::super::ScalarFunction;
    use rand::Rng;

    struct Fixture {
        grid: Arc<HornGrid>,
        basis: Arc<SpectralBasis>,
    }

    fn fixture() -> Fixture {
        let grid = Arc::new(build_grid(&BoundaryCurve::gaussian(), 2, 3.0, 0.1).unwrap());
        let basis = Arc::new(build_basis(&grid, 6, 4.0).unwrap());
        Fixture { grid, basis }
    }

    fn problem(f: &Fixture, n_steps: usize, nl: NonlinearitySpec, initial: Vec<f64>, seed: u64) -> Problem {
        let hs = HurstSequence::new(vec![0.7, 0.75, 0.8, 0.85, 0.9, 0.95], 1.0, 0.35).unwrap();
        let tg = TimeGrid::new(1.0, n_steps).unwrap();
        Problem {
            grid: Arc::clone(&f.grid),
            coefficient: CoefficientField::default(),
            nonlinearity: nl,
            initial,
            noise: sample_noise(Arc::clone(&f.basis), &hs, tg, seed).unwrap(),
            tolerance: 1e-10,
        }
    }

    fn nl(g: ScalarFunction, h: ScalarFunction) -> NonlinearitySpec {
        NonlinearitySpec { g, h, gamma: 1.0 }
    }

    fn mass(grid: &HornGrid, u: &[f64]) -> f64 {
        u.iter().zip(grid.masses()).map(|(a, m)| a * m).sum()
    }

    #[test]
    fn operator_structure_and_sandwich() {
        let f = fixture();
        let k = CoefficientField::Rotated { principal: [0.5, 2.0, 1.0], angle: 0.3, twist: 0.7 };
        let op = assemble_operator(&f.grid, &k, 0.0).unwrap();
        assert!(op.stiffness.asymmetry() <= 1e-12);
        let scale = op.stiffness.diagonal().iter().fold(0.0f64, |a, b| a.max(b.abs()));
        assert!(op.stiffness.row_sums().iter().all(|s| s.abs() <= 1e-12 * scale));
        let ones = vec![1.0; f.grid.n_nodes()];
        assert!(op.energy(&ones).abs() <= 1e-12 * scale);
        let (lo, hi) = k.bounds(2);
        let mut r = rng::rng(5);
        for _ in 0..20 {
            let w: Vec<f64> = (0..f.grid.n_nodes()).map(|_| r.random_range(-1.0..1.0)).collect();
            let semi = h1_seminorm(&f.grid, &w).unwrap().powi(2);
            let e = op.energy(&w);
            assert!(lo * semi <= e * (1.0 + 1e-12) && e <= hi * semi * (1.0 + 1e-12), "{lo} {semi} {e} {hi}");
        }
        let bad = CoefficientField::Oscillating { amplitude: 1.2, wavenumber: 1.0, frequency: 0.0 };
        assert!(matches!(assemble_operator(&f.grid, &bad, 0.0), Err(Error::Config(_))));
    }

    #[test]
    fn identity_coefficient_gives_geometric_stencil() {
        let f = fixture();
        let op = assemble_operator(&f.grid, &CoefficientField::default(), 0.0).unwrap();
        for face in &f.grid.faces {
            let t = face.geometric_transmissibility();
            assert!((op.stiffness.get(face.a, face.b) - t).abs() <= 1e-14 * t.max(1.0));
        }
    }

    #[test]
    fn constant_is_preserved() {
        let f = fixture();
        let p = problem(&f, 16, NonlinearitySpec::default(), vec![2.5; f.grid.n_nodes()], 1);
        let traj = solve(&p).unwrap();
        assert!(traj.is_complete());
        assert_eq!(traj.fields.len(), 17);
        for u in &traj.fields {
            assert!(u.iter().all(|v| (v - 2.5).abs() <= 1e-12));
        }
    }

    #[test]
    fn linear_decay_reduces_to_ode() {
        let f = fixture();
        let n = 1024;
        let p = problem(&f, n, nl(ScalarFunction::Affine { slope: -1.0, offset: 0.0 }, ScalarFunction::Zero), vec![3.0; f.grid.n_nodes()], 1);
        let traj = solve(&p).unwrap();
        // Explicit reaction: u_{n+1} = (1 − dt) u_n.
        let discrete = 3.0 * (1.0 - 1.0 / n as f64).powi(n as i32);
        for v in traj.final_field() {
            assert!((v - discrete).abs() <= 1e-11, "{v} {discrete}");
            assert!((v / (3.0 * (-1f64).exp()) - 1.0).abs() <= 1e-3);
        }
    }

    #[test]
    fn additive_noise_mass_balance() {
        let f = fixture();
        let p = problem(&f, 32, nl(ScalarFunction::Zero, ScalarFunction::Constant { value: 1.0 }), f.basis.vectors[2].clone(), 9);
        let traj = solve(&p).unwrap();
        let mut noise_mass = 0.0;
        for n in 0..32 {
            noise_mass += mass(&f.grid, &evaluate_noise_field(&p.noise, n).unwrap());
        }
        let got = mass(&f.grid, traj.final_field()) - mass(&f.grid, &p.initial);
        assert!((got - noise_mass).abs() <= 1e-12, "{got} {noise_mass}");
    }

    #[test]
    fn second_mode_decays_exponentially() {
        let f = fixture();
        let e2 = f.basis.vectors[1].clone();
        let mu = f.basis.laplacian_eigenvalues[1];
        let n = 1024;
        let p = problem(&f, n, NonlinearitySpec::default(), e2.clone(), 1);
        let traj = solve(&p).unwrap();
        let want = (-mu).exp();
        let diff: Vec<f64> = traj.final_field().iter().zip(&e2).map(|(u, e)| u - want * e).collect();
        let err = l2_norm(&f.grid, &diff).unwrap() / want;
        assert!(err <= 1e-2, "mu = {mu}, relative error {err}");
    }

    #[test]
    fn conservation_and_dissipation() {
        let f = fixture();
        let phi = InitialCondition::Bump { center: [0.4, 0.2, 0.0], width: 0.3, amplitude: 1.0 }
            .realize(&f.grid, &f.basis, 0)
            .unwrap();
        let mut p = problem(&f, 40, NonlinearitySpec::default(), phi, 1);
        p.coefficient = CoefficientField::Oscillating { amplitude: 0.5, wavenumber: 2.0, frequency: 3.0 };
        let traj = solve(&p).unwrap();
        let m0 = mass(&f.grid, &p.initial);
        for u in &traj.fields {
            assert!((mass(&f.grid, u) - m0).abs() <= 1e-12);
        }
        assert!(traj.l2_norms.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-12)));
    }

    #[test]
    fn deterministic_given_seed() {
        let f = fixture();
        let phi = InitialCondition::Random { amplitude: 1.0 }.realize(&f.grid, &f.basis, 4).unwrap();
        let g = nl(ScalarFunction::Sine { amplitude: 0.5, frequency: 1.0, offset: 0.0 }, ScalarFunction::Tanh { amplitude: 1.0, offset: 0.2 });
        let a = solve(&problem(&f, 20, g, phi.clone(), 33)).unwrap();
        let b = solve(&problem(&f, 20, g, phi, 33)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn residual_identities() {
        let f = fixture();
        let p = problem(&f, 32, nl(ScalarFunction::Zero, ScalarFunction::Constant { value: 1.0 }), f.basis.vectors[1].clone(), 12);
        let traj = solve(&p).unwrap();
        let ones = vec![1.0; f.grid.n_nodes()];
        let r = variational_residual(&traj, &p, &ones, &TimeProfile::Constant { value: 1.0 }, 1.0).unwrap();
        assert!(r.residual.abs() <= 1e-12, "{r:?}");
        assert!(r.stochastic.abs() > 1e-3);
        let r0 = variational_residual(&traj, &p, &f.basis.vectors[1], &TimeProfile::Linear { intercept: 0.0, slope: 1.0 }, 0.0)
            .unwrap();
        assert_eq!(r0.residual, 0.0);
    }

    #[test]
    fn implicit_schemes_agree_for_linear_reaction() {
        let f = fixture();
        let phi = f.basis.vectors[1].iter().map(|v| v + 1.0).collect();
        let p = problem(&f, 8, nl(ScalarFunction::Affine { slope: -1.0, offset: 0.5 }, ScalarFunction::Zero), phi, 3);
        let rep = uniqueness_probe(&p, 3, 1e-10).unwrap();
        assert!(rep.conclusive && rep.h_affine);
        for r in &rep.ratios {
            assert!(*r > 1.8 && *r < 2.2, "{rep:?}");
        }
    }

    #[test]
    fn rejects_bad_input() {
        let f = fixture();
        let mut p = problem(&f, 4, NonlinearitySpec::default(), vec![0.0; f.grid.n_nodes()], 1);
        p.initial[3] = f64::NAN;
        assert!(solve(&p).is_err());
        p.initial = vec![0.0; 5];
        assert!(solve(&p).is_err());
        assert!(InitialCondition::Mode { index: 7, amplitude: 1.0 }.realize(&f.grid, &f.basis, 0).is_err());
    }
}
