//! Verification suites. Each returns named checks plus the tables behind
//! them.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use hornspde::calibration::{self, Calibration};
use hornspde::domain::l2_inner;
use hornspde::grr::{increment_check_with_theta, increment_constant, lambda_chain_bound, GrrExponents};
use hornspde::norms::{embedding_check, tensor_corpus};
use hornspde::rng::{self, stream};
use hornspde::solver::{
    solve, uniqueness_probe, variational_residual, NonlinearitySpec, Problem, ScalarFunction, TimeProfile,
};
use hornspde::spectral::{sample_noise, spectral_condition, Verdict};
use hornspde::young::{
    lambda_sup, richardson, running_young_integral, stieltjes_bound, young_integrate, IntegrandPath,
};
use hornspde::{fbm_covariance, grr_check, holder_exponent, FbmMethod, FbmSampler, HurstSequence, TimeGrid};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;
use crate::error::{CliError, CliResult};
use crate::model::Setup;
use crate::output::{Check, Table};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Suite {
    Noise,
    Grr,
    Lemma3,
    Embedding,
    Residual,
    Uniqueness,
}

impl Suite {
    pub const ALL: [Suite; 6] = [Suite::Noise, Suite::Grr, Suite::Lemma3, Suite::Embedding, Suite::Residual, Suite::Uniqueness];

    pub fn name(&self) -> &'static str {
        match self {
            Suite::Noise => "noise",
            Suite::Grr => "grr",
            Suite::Lemma3 => "lemma3",
            Suite::Embedding => "embedding",
            Suite::Residual => "residual",
            Suite::Uniqueness => "uniqueness",
        }
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Suite {
    type Err = CliError;

    fn from_str(s: &str) -> CliResult<Self> {
        Suite::ALL
            .into_iter()
            .find(|x| x.name() == s)
            .ok_or_else(|| CliError::Usage(format!("unknown suite {s:?}; expected one of noise, grr, lemma3, embedding, residual, uniqueness")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub suite: Suite,
    pub pass: bool,
    pub checks: Vec<Check>,
    pub tables: Vec<(String, Table)>,
}

impl SuiteReport {
    fn new(suite: Suite, checks: Vec<Check>, tables: Vec<(String, Table)>) -> Self {
        SuiteReport { suite, pass: checks.iter().all(|c| c.pass), checks, tables }
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn table(&self, name: &str) -> Option<&Table> {
        self.tables.iter().find(|t| t.0 == name).map(|t| &t.1)
    }
}

pub fn run(cfg: &ExperimentConfig, suite: Suite) -> CliResult<SuiteReport> {
    log::info!("suite {suite}");
    match suite {
        Suite::Noise => noise(cfg),
        Suite::Grr => grr(cfg),
        Suite::Lemma3 => lemma3(cfg),
        Suite::Embedding => embedding(cfg),
        Suite::Residual => residual(cfg),
        Suite::Uniqueness => uniqueness(cfg),
    }
}

fn seed_for(cfg: &ExperimentConfig, path: &[u64]) -> u64 {
    rng::derive_seed(cfg.seed, path)
}

fn quantile(v: &[f64], q: f64) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(|a, b| a.total_cmp(b));
    if s.is_empty() {
        return f64::NAN;
    }
    let pos = q * (s.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    s[lo] + (pos - lo as f64) * (s[hi] - s[lo])
}

/// `[a, b, …]` in scientific notation.
pub fn sci(v: &[f64]) -> String {
    let items: Vec<String> = v.iter().map(|x| format!("{x:.3e}")).collect();
    format!("[{}]", items.join(", "))
}

fn spread(v: &[f64]) -> f64 {
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = v.iter().copied().fold(f64::INFINITY, f64::min);
    max / min
}

/// Node pairs probing the covariance at a spread of times and lags.
pub fn probe_pairs(n: usize) -> Vec<(usize, usize)> {
    let c = |x: usize| x.clamp(1, n);
    vec![
        (1, 1),
        (1, n),
        (c(n / 8), c(n / 4)),
        (c(n / 4), c(n / 4)),
        (c(n / 4), c(3 * n / 4)),
        (c(n / 2), c(n / 2)),
        (c(n / 2), n),
        (c(n / 5), c(3 * n / 4 + 5)),
        (n, n),
        (c(5), c(n - 8)),
    ]
}

fn noise(cfg: &ExperimentConfig) -> CliResult<SuiteReport> {
    let v = &cfg.verify;
    let mut checks = Vec::new();
    let mut law = Table::new(&["hurst", "s", "t", "exact", "empirical", "standard_error", "z"]);
    let grid = TimeGrid::new(cfg.time.horizon, v.law_steps)?;
    let pairs = probe_pairs(v.law_steps);
    for (k, &h) in v.law_hursts.iter().enumerate() {
        let sampler = FbmSampler::new(h, grid, FbmMethod::Cholesky)?;
        let paths = sampler.sample_many(v.law_samples, seed_for(cfg, &[stream::NOISE, 100 + k as u64]));
        let mut worst: f64 = 0.0;
        for &(a, b) in &pairs {
            let prods: Vec<f64> = paths.iter().map(|p| p.values[a] * p.values[b]).collect();
            let n = prods.len() as f64;
            let mean = prods.iter().sum::<f64>() / n;
            let var = prods.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
            let se = (var / n).sqrt();
            let exact = fbm_covariance(h, grid.node(a), grid.node(b))?;
            let z = (mean - exact) / se;
            worst = worst.max(z.abs());
            law.push(vec![h, grid.node(a), grid.node(b), exact, mean, se, z]);
        }
        checks.push(Check::new(
            format!("fbm-law-H{h}"),
            worst <= 3.0,
            format!("{} samples, n={}, {} probe pairs, max |z| = {worst:.3}", v.law_samples, v.law_steps, pairs.len()),
        ));
    }

    let kmax = 400;
    let ones = vec![1.0; kmax];
    let conv: Vec<f64> = (1..=kmax).map(|i| (i as f64).powi(-4)).collect();
    let div: Vec<f64> = (1..=kmax).map(|i| (i as f64).powi(-2)).collect();
    let rc = spectral_condition(&conv, &ones);
    let rd = spectral_condition(&div, &ones);
    let total = rc.partial_sum + rc.extrapolated_tail.unwrap_or(f64::NAN);
    let pi2_6 = std::f64::consts::PI.powi(2) / 6.0;
    checks.push(Check::new(
        "spectral-p-series",
        rc.verdict == Verdict::Pass && rd.verdict == Verdict::Fail && (total - pi2_6).abs() < 1e-3,
        format!(
            "i^-2 summands: {:?}, extrapolated sum {total:.6} (pi^2/6 = {pi2_6:.6}); 1/i summands: {:?}, fitted exponent {:.4}",
            rc.verdict,
            rd.verdict,
            rd.fitted_exponent.unwrap_or(f64::NAN)
        ),
    ));

    let mut mesh = Table::new(&["resolution", "nodes", "modes", "partial_sum", "tail", "exponent", "pass"]);
    let mut verdicts = Vec::new();
    for &r in &v.spectral_resolutions {
        let s = Setup::at_resolution(cfg, r, v.spectral_modes)?;
        let rep = &s.spectral;
        mesh.push(vec![
            r,
            s.grid.n_nodes() as f64,
            s.basis.len() as f64,
            rep.partial_sum,
            rep.extrapolated_tail.unwrap_or(f64::NAN),
            rep.fitted_exponent.unwrap_or(f64::NAN),
            if rep.verdict == Verdict::Pass { 1.0 } else { 0.0 },
        ]);
        verdicts.push(rep.verdict);
    }
    let stable = verdicts.windows(2).all(|w| w[0] == w[1]) && verdicts.first() != Some(&Verdict::Indeterminate);
    checks.push(Check::new(
        "spectral-mesh-stability",
        stable && verdicts.len() >= 3,
        format!("decay exponent {}, verdicts {verdicts:?} at resolutions {:?}", cfg.basis.decay_exponent, v.spectral_resolutions),
    ));
    Ok(SuiteReport::new(Suite::Noise, checks, vec![("fbm_law".into(), law), ("spectral_mesh".into(), mesh)]))
}

/// Per-path quantities of the GRR suite.
struct GrrRow {
    grr_ratio: f64,
    violations: usize,
    increment_ratio: f64,
    theta: f64,
    lambda: f64,
    lambda_chain: f64,
}

fn grr(cfg: &ExperimentConfig) -> CliResult<SuiteReport> {
    let v = &cfg.verify;
    let cal: Calibration = calibration::frozen()?;
    let h_inf = v.hurst_sweep.iter().copied().fold(f64::INFINITY, f64::min);
    let alpha = cfg.hurst.alpha;
    let eps = cal.epsilon;
    let canonical = 0.5 * (h_inf - 1.0 + alpha);
    let gamma = cfg.hurst.gamma;
    let c_inc = increment_constant(cal.c_t, gamma, eps, h_inf, cal.horizon)?;
    let dt = cal.horizon / cal.n_steps as f64;

    let mut per_h = Table::new(&[
        "hurst", "paths", "grr_violations", "grr_max_ratio", "increment_max_ratio", "chain_max_ratio", "theta_p1", "theta_p2",
        "lambda_p1", "lambda_p2",
    ]);
    let mut all_rows = Vec::new();
    for &h in &v.hurst_sweep {
        let exps = GrrExponents::for_increment_bound(h, eps)?;
        let paths = calibration::held_out_paths(&cal, h, v.paths)?;
        let rows: Vec<CliResult<GrrRow>> = paths
            .par_iter()
            .map(|p| {
                let r = grr_check(p, dt, exps, cal.c_t)?;
                let theta = (0.5 * eps * r.ln_functional).exp();
                let inc = increment_check_with_theta(p, dt, theta, eps, h_inf, c_inc);
                let lambda = (PI * alpha).sin() / PI * lambda_sup(p, dt, alpha);
                let chain = lambda_chain_bound(c_inc, cal.horizon, h_inf, eps, alpha, theta)?;
                Ok(GrrRow {
                    grr_ratio: r.max_ratio,
                    violations: r.violations,
                    increment_ratio: inc.max_ratio,
                    theta,
                    lambda,
                    lambda_chain: if lambda == 0.0 { 0.0 } else { lambda / chain },
                })
            })
            .collect();
        let rows = rows.into_iter().collect::<CliResult<Vec<_>>>()?;
        let n = rows.len() as f64;
        let mean = |f: &dyn Fn(&GrrRow) -> f64| rows.iter().map(f).sum::<f64>() / n;
        let max = |f: &dyn Fn(&GrrRow) -> f64| rows.iter().map(f).fold(0.0, f64::max);
        per_h.push(vec![
            h,
            n,
            rows.iter().filter(|r| r.violations > 0).count() as f64,
            max(&|r| r.grr_ratio),
            max(&|r| r.increment_ratio),
            max(&|r| r.lambda_chain),
            mean(&|r| r.theta),
            mean(&|r| r.theta * r.theta),
            mean(&|r| r.lambda),
            mean(&|r| r.lambda * r.lambda),
        ]);
        all_rows.push(rows);
    }
    let col = |name: &str| per_h.column(name).expect("column exists");
    let total_paths: usize = all_rows.iter().map(|r| r.len()).sum();
    let violating: f64 = col("grr_violations").iter().sum();
    let mut checks = vec![Check::new(
        "grr-held-out",
        violating == 0.0,
        format!(
            "c_T = {:.6} (frozen), q = {}, eps = {eps}; {violating} violating paths of {total_paths} held-out; max ratio {:.4}",
            cal.c_t,
            2.0 / eps,
            col("grr_max_ratio").iter().copied().fold(0.0, f64::max)
        ),
    )];
    if (canonical - eps).abs() > 1e-12 {
        checks.push(Check::new(
            "epsilon-consistency",
            false,
            format!("frozen calibration uses eps = {eps} but the configured window gives {canonical}"),
        ));
    }
    let inc_max = col("increment_max_ratio").iter().copied().fold(0.0, f64::max);
    checks.push(Check::new(
        "increment-bound",
        inc_max <= 1.0,
        format!("constant {c_inc:.6}, exponent H_inf - eps = {:.4}; max ratio over all node pairs {inc_max:.4}", h_inf - eps),
    ));
    let chain_max = col("chain_max_ratio").iter().copied().fold(0.0, f64::max);
    checks.push(Check::new("lambda-chain-bound", chain_max <= 1.0, format!("max Lambda / chain bound {chain_max:.4}")));
    for (name, label) in [("theta_p1", "theta-moment-p1"), ("theta_p2", "theta-moment-p2"), ("lambda_p1", "lambda-moment-p1"), ("lambda_p2", "lambda-moment-p2")] {
        let c = col(name);
        let s = spread(&c);
        checks.push(Check::new(
            label,
            s < 2.0,
            format!("max/min of ensemble means across H = {:?}: {s:.3} (means {:?})", v.hurst_sweep, c.iter().map(|x| (x * 1e4).round() / 1e4).collect::<Vec<_>>()),
        ));
    }
    Ok(SuiteReport::new(Suite::Grr, checks, vec![("grr_sweep".into(), per_h)]))
}

fn lemma3(cfg: &ExperimentConfig) -> CliResult<SuiteReport> {
    let v = &cfg.verify;
    let alpha = cfg.hurst.alpha;
    let horizon = cfg.time.horizon;
    let mut checks = Vec::new();
    let mut tables = Vec::new();

    // Domination |∫ f dB| ≤ Λ · weight on sampled pairs.
    let grid = TimeGrid::new(horizon, v.pair_steps)?;
    let samplers: Vec<FbmSampler> =
        v.hurst_sweep.iter().map(|&h| FbmSampler::new(h, grid, FbmMethod::Cholesky)).collect::<Result<_, _>>()?;
    let integrand_sampler = FbmSampler::new(0.75, grid, FbmMethod::Cholesky)?;
    let rows: Vec<CliResult<(f64, f64, f64, f64)>> = (0..v.pairs)
        .into_par_iter()
        .map(|k| {
            let s = &samplers[k % samplers.len()];
            let b = s.sample(rng::sub_seed(seed_for(cfg, &[stream::NOISE, 200]), k as u64));
            let mut r = rng::rng(rng::sub_seed(seed_for(cfg, &[stream::INTEGRAND]), k as u64));
            let f = match k % 3 {
                0 => IntegrandPath::from(&integrand_sampler.sample(r.random())),
                1 => IntegrandPath::from(&b),
                _ => {
                    let (a0, a1, a2, w, ph): (f64, f64, f64, f64, f64) =
                        (r.random_range(-1.0..1.0), r.random_range(-2.0..2.0), r.random_range(-1.0..1.0), r.random_range(0.0..20.0), r.random_range(0.0..6.3));
                    IntegrandPath::from_fn(grid, move |t| a0 + a1 * (w * t + ph).sin() + a2 * t * t)?
                }
            };
            let (lo, hi) = if k % 2 == 0 {
                (0, v.pair_steps)
            } else {
                let a = r.random_range(0..v.pair_steps);
                let b = r.random_range(a + 1..=v.pair_steps);
                (a, b)
            };
            let (t0, t1) = (grid.node(lo), grid.node(hi));
            let integral = young_integrate(&f, &b, t0, t1)?;
            let bound = stieltjes_bound(&f, &b, alpha, t0, t1)?;
            Ok((b.hurst, integral, bound.bound, if bound.bound > 0.0 { integral.abs() / bound.bound } else { 0.0 }))
        })
        .collect();
    let rows = rows.into_iter().collect::<CliResult<Vec<_>>>()?;
    let mut dom = Table::new(&["hurst", "integral", "bound", "ratio"]);
    for r in &rows {
        dom.push(vec![r.0, r.1, r.2, r.3]);
    }
    let held = rows.iter().filter(|r| r.1.abs() <= r.2).count();
    checks.push(Check::new(
        "stieltjes-domination",
        held == rows.len(),
        format!("{held}/{} pairs dominated at n={}, alpha={alpha}; max |integral|/bound {:.4}", rows.len(), v.pair_steps, rows.iter().map(|r| r.3).fold(0.0, f64::max)),
    ));
    tables.push(("domination".into(), dom));

    // Chain rule ∫ B dB = B²/2 after Richardson extrapolation over a 4× refinement.
    let fine = TimeGrid::new(horizon, v.chain_steps)?;
    let mut chain = Table::new(&["hurst", "median_rel_error", "p90_rel_error", "fraction_within_1e-3"]);
    let mut gate = None;
    for (k, &h) in v.hurst_sweep.iter().enumerate() {
        let s = FbmSampler::new(h, fine, FbmMethod::Cholesky)?;
        let errs: Vec<f64> = s
            .sample_many(v.chain_paths, seed_for(cfg, &[stream::NOISE, 300 + k as u64]))
            .par_iter()
            .map(|p| {
                let n = v.chain_steps;
                let fine_sum = running_young_integral(&p.values, &p.values)[n];
                let coarse: Vec<f64> = p.values.iter().step_by(4).copied().collect();
                let coarse_sum = running_young_integral(&coarse, &coarse)[n / 4];
                let extrapolated = richardson(fine_sum, coarse_sum, 4.0, 2.0 * h - 1.0);
                let want = 0.5 * p.values[n] * p.values[n];
                ((extrapolated - want) / want).abs()
            })
            .collect();
        let within = errs.iter().filter(|e| **e <= 1e-3).count() as f64 / errs.len() as f64;
        let med = quantile(&errs, 0.5);
        chain.push(vec![h, med, quantile(&errs, 0.9), within]);
        gate = Some((h, med));
    }
    let (gate_h, gate_med) = gate.expect("nonempty sweep");
    checks.push(Check::new(
        "chain-rule",
        gate_med <= 1e-3,
        format!(
            "n={} vs n/4, Richardson order 2H-1; median relative error {gate_med:.3e} at H={gate_h} (per-H medians {:?})",
            v.chain_steps,
            chain.column("median_rel_error").unwrap().iter().map(|x| format!("{x:.2e}")).collect::<Vec<_>>()
        ),
    ));
    tables.push(("chain_rule".into(), chain));

    // Hölder exponent of the running stochastic integral from the solver.
    let setup = Setup::build(cfg)?;
    let tg = TimeGrid::new(horizon, v.holder_steps)?;
    let test: Vec<f64> = setup.basis.vectors[1].iter().map(|x| 1.0 + x).collect();
    let mut holder = Table::new(&["hurst", "median_exponent", "min_exponent", "trajectories"]);
    let mut ok = true;
    for (k, &h) in v.hurst_sweep.iter().enumerate() {
        let hs = HurstSequence::new(vec![h; setup.basis.len()], cfg.hurst.gamma, alpha)?;
        let exps: Vec<CliResult<f64>> = (0..v.holder_trajectories)
            .into_par_iter()
            .map(|j| {
                let seed = rng::sub_seed(seed_for(cfg, &[stream::NOISE, 400 + k as u64]), j as u64);
                let noise = sample_noise(Arc::clone(&setup.basis), &hs, tg, seed)?;
                let p = Problem {
                    grid: Arc::clone(&setup.grid),
                    coefficient: cfg.coefficient,
                    nonlinearity: cfg.nonlinearity,
                    initial: cfg.initial.realize(&setup.grid, &setup.basis, seed)?,
                    noise,
                    tolerance: cfg.solver.tolerance,
                };
                let traj = solve(&p)?;
                if !traj.is_complete() {
                    return Err(CliError::Config(format!("trajectory aborted: {:?}", traj.status)));
                }
                // Scalar projection (v, ∫ h(u) dW) with v = 1 + e₂.
                let mut running = vec![0.0; v.holder_steps + 1];
                for i in 0..p.noise.n_modes() {
                    let e = setup.basis.scaled_mode(i);
                    let f: Vec<f64> = traj.fields[..v.holder_steps]
                        .iter()
                        .map(|u| {
                            let he: Vec<f64> = p.nonlinearity.h.apply(u).iter().zip(&e).map(|(a, b)| a * b).collect();
                            l2_inner(&setup.grid, &test, &he)
                        })
                        .collect::<Result<_, _>>()?;
                    let path = p.noise.path(i);
                    for (acc, x) in running.iter_mut().zip(running_young_integral(&f, &path)) {
                        *acc += x;
                    }
                }
                Ok(holder_exponent(&running, tg.dt())?)
            })
            .collect();
        let exps = exps.into_iter().collect::<CliResult<Vec<_>>>()?;
        let med = quantile(&exps, 0.5);
        ok &= med >= 0.45;
        holder.push(vec![h, med, exps.iter().copied().fold(f64::INFINITY, f64::min), exps.len() as f64]);
    }
    checks.push(Check::new(
        "holder-rate",
        ok,
        format!(
            "n={}, {} trajectories per H; median exponents {:?}",
            v.holder_steps,
            v.holder_trajectories,
            holder.column("median_exponent").unwrap().iter().map(|x| format!("{x:.3}")).collect::<Vec<_>>()
        ),
    ));
    tables.push(("holder".into(), holder));
    Ok(SuiteReport::new(Suite::Lemma3, checks, tables))
}

fn embedding(cfg: &ExperimentConfig) -> CliResult<SuiteReport> {
    let v = &cfg.verify;
    let setup = Setup::build(cfg)?;
    let tg = TimeGrid::new(cfg.time.horizon, v.embedding_steps)?;
    let corpus = tensor_corpus(&setup.grid, tg, 2 * v.embedding_members, seed_for(cfg, &[stream::CORPUS]))?;
    let alpha = cfg.hurst.alpha;
    let small = embedding_check(&corpus[..v.embedding_members], alpha)?;
    let large = embedding_check(&corpus, alpha)?;
    let drift = (large.c_emp - small.c_emp).abs() / small.c_emp;
    let mut t = Table::new(&["members", "c_emp", "analytic", "trace_constant", "max_increment_ratio"]);
    for r in [&small, &large] {
        t.push(vec![r.ratios.len() as f64, r.c_emp, r.analytic, r.trace_constant, r.max_increment_ratio]);
    }
    let checks = vec![
        Check::new(
            "increment-bound",
            small.max_increment_ratio <= 1.0 && large.max_increment_ratio <= 1.0,
            format!("max ||u(t)-u(s)|| / ((t-s)^1/2 ||u||_1,2,T) = {:.4} over {} members", large.max_increment_ratio, corpus.len()),
        ),
        Check::new(
            "c-emp-stability",
            drift < 0.1,
            format!("c_emp {:.5} ({} members) -> {:.5} ({} members), drift {:.2}%", small.c_emp, small.ratios.len(), large.c_emp, large.ratios.len(), 100.0 * drift),
        ),
        Check::new(
            "c-emp-below-analytic",
            large.c_emp <= large.analytic,
            format!("c_emp {:.5} vs analytic chain {:.5}", large.c_emp, large.analytic),
        ),
    ];
    Ok(SuiteReport::new(Suite::Embedding, checks, vec![("embedding".into(), t)]))
}

/// Nonlinearity of the refinement studies: `g = sin u`, `h = u/2 + 1`.
pub fn refinement_nonlinearity() -> NonlinearitySpec {
    NonlinearitySpec {
        g: ScalarFunction::Sine { amplitude: 1.0, frequency: 1.0, offset: 0.0 },
        h: ScalarFunction::Affine { slope: 0.5, offset: 1.0 },
        gamma: 1.0,
    }
}

fn residual(cfg: &ExperimentConfig) -> CliResult<SuiteReport> {
    let v = &cfg.verify;
    let hs = HurstSequence::new(cfg.hurst.values[..v.residual_modes].to_vec(), cfg.hurst.gamma, cfg.hurst.alpha)?;
    let mut t = Table::new(&["level", "resolution", "steps", "nodes", "residual", "mass_residual"]);
    let mut base = None;
    let mut residuals = Vec::new();
    let mut mass = Vec::new();
    for l in 0..v.residual_levels {
        let r = v.residual_resolution / (1 << l) as f64;
        let setup = Setup::at_resolution(cfg, r, v.residual_modes)?;
        let noise = match &base {
            None => {
                let n = sample_noise(
                    Arc::clone(&setup.basis),
                    &hs,
                    TimeGrid::new(cfg.time.horizon, v.residual_steps)?,
                    seed_for(cfg, &[stream::NOISE, 500]),
                )?;
                base = Some(n.clone());
                n
            }
            Some(b) => b.subdivided(1 << l).with_basis(Arc::clone(&setup.basis))?,
        };
        let nodes = setup.grid.n_nodes();
        let p = Problem {
            grid: Arc::clone(&setup.grid),
            coefficient: cfg.coefficient,
            nonlinearity: refinement_nonlinearity(),
            initial: vec![1.0; nodes],
            noise,
            tolerance: cfg.solver.tolerance,
        };
        let traj = solve(&p)?;
        let tend = cfg.time.horizon;
        let res = variational_residual(&traj, &p, &setup.basis.vectors[1], &TimeProfile::Linear { intercept: 0.0, slope: 1.0 }, tend)?;
        // Constant test function, additive noise: the exact discrete identity.
        let additive = Problem {
            nonlinearity: NonlinearitySpec { g: ScalarFunction::Zero, h: ScalarFunction::Constant { value: 1.0 }, gamma: 1.0 },
            ..p.clone()
        };
        let at = solve(&additive)?;
        let mres = variational_residual(&at, &additive, &vec![1.0; nodes], &TimeProfile::Constant { value: 1.0 }, tend)?;
        t.push(vec![l as f64, r, p.noise.grid.n_steps() as f64, nodes as f64, res.residual, mres.residual]);
        residuals.push(res.residual.abs());
        mass.push(mres.residual.abs());
    }
    let ratios: Vec<f64> = residuals.windows(2).map(|w| w[0] / w[1]).collect();
    let mass_max = mass.iter().copied().fold(0.0, f64::max);
    let checks = vec![
        Check::new(
            "residual-refinement",
            ratios.len() + 1 >= 2 && ratios.iter().all(|r| *r >= 2.0),
            format!("|residual| {} for v = e2 x t; ratios per level {ratios:.3?}", sci(&residuals)),
        ),
        Check::new("mass-identity", mass_max <= 1e-12, format!("max |residual| with v = 1, h = 1: {mass_max:.3e}")),
    ];
    Ok(SuiteReport::new(Suite::Residual, checks, vec![("residual".into(), t)]))
}

fn uniqueness(cfg: &ExperimentConfig) -> CliResult<SuiteReport> {
    let v = &cfg.verify;
    let setup = Setup::at_resolution(cfg, cfg.domain.resolution, v.uniqueness_modes)?;
    let hs = cfg.hurst_sequence()?;
    let tg = TimeGrid::new(cfg.time.horizon, v.uniqueness_steps)?;
    let noise = sample_noise(Arc::clone(&setup.basis), &hs, tg, seed_for(cfg, &[stream::NOISE, 600]))?;
    let phi: Vec<f64> = setup.basis.vectors[1].iter().map(|x| 1.0 + x).collect();
    let cases = [
        ("h=0", ScalarFunction::Zero),
        ("h=1", ScalarFunction::Constant { value: 1.0 }),
        ("h=0.5u+1", ScalarFunction::Affine { slope: 0.5, offset: 1.0 }),
        ("h=tanh(u)", ScalarFunction::Tanh { amplitude: 1.0, offset: 0.0 }),
    ];
    let mut t = Table::new(&["case", "level", "steps", "distance"]);
    let mut checks = Vec::new();
    for (ci, (label, h)) in cases.iter().enumerate() {
        let p = Problem {
            grid: Arc::clone(&setup.grid),
            coefficient: cfg.coefficient,
            nonlinearity: NonlinearitySpec { g: v.uniqueness_g, h: *h, gamma: 1.0 },
            initial: phi.clone(),
            noise: noise.clone(),
            tolerance: cfg.solver.tolerance,
        };
        let rep = uniqueness_probe(&p, v.uniqueness_levels, cfg.solver.fixed_point_tolerance)?;
        for (l, (s, d)) in rep.steps.iter().zip(&rep.distances).enumerate() {
            t.push(vec![ci as f64, l as f64, *s as f64, *d]);
        }
        let detail = format!("distances {}, ratios {:.4?}", sci(&rep.distances), rep.ratios);
        if rep.h_affine {
            checks.push(Check::new(
                format!("uniqueness-{label}"),
                rep.conclusive && rep.ratios.iter().all(|r| *r >= 2.0),
                if rep.conclusive { detail } else { format!("inconclusive: {:?}", rep.note) },
            ));
        } else {
            log::info!("non-affine {label} (descriptive only): {detail}");
        }
    }
    Ok(SuiteReport::new(Suite::Uniqueness, checks, vec![("uniqueness".into(), t)]))
}
