//! The subcommands. Each validates its inputs before any compute, writes its
//! files through one [`OutputDir`] and ends with `manifest.json`.

use std::path::Path;
use std::sync::Arc;
use std::time::Instant;

use hornspde::calibration::{self, CalibrationSpec};
use hornspde::domain::{build_grid, h1_seminorm, l2_norm, validate_curve, BoundaryCurve, DEFAULT_EPSILONS, DEFAULT_S_MAX};
use hornspde::rng::{self, stream};
use hornspde::solver::{solve, variational_residual, NonlinearitySpec, Problem, ScalarFunction, TimeProfile};
use hornspde::spectral::{basis_table, sample_noise};
use hornspde::{FbmMethod, FbmSampler, TimeGrid};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::ExperimentConfig;
use crate::error::{CliError, CliResult};
use crate::model::{self, Setup};
use crate::output::{Check, OutputDir, RunManifest, Stamp, Table};
use crate::suites::{self, Suite};

pub const MANIFEST: &str = "manifest.json";

fn open(cfg: &ExperimentConfig, out: &Path) -> CliResult<OutputDir> {
    OutputDir::create(out, Stamp { fingerprint: cfg.fingerprint(), seed: cfg.seed })
}

fn finish(mut dir: OutputDir, command: &str, checks: Vec<Check>, start: Instant) -> CliResult<RunManifest> {
    let manifest = RunManifest::new(command, checks, start.elapsed().as_secs_f64(), dir.digests()?);
    dir.json(MANIFEST, &manifest)?;
    Ok(manifest)
}

fn check_memory(cfg: &ExperimentConfig, nodes: usize, steps: usize) -> CliResult<()> {
    let mb = model::memory_estimate_mb(nodes, steps);
    if mb > cfg.solver.memory_cap_mb {
        return Err(CliError::Refused(format!(
            "estimated peak memory {mb:.0} MiB ({nodes} nodes, {steps} steps) exceeds solver.memory_cap_mb = {}",
            cfg.solver.memory_cap_mb
        )));
    }
    Ok(())
}

/// Solves every ensemble member; one norm table per trajectory.
pub fn simulate(cfg: &ExperimentConfig, out: &Path) -> CliResult<RunManifest> {
    let start = Instant::now();
    cfg.validate()?;
    let setup = Setup::build(cfg)?;
    setup.gate(cfg)?;
    check_memory(cfg, setup.grid.n_nodes(), cfg.time.n_steps)?;
    let hs = cfg.hurst_sequence()?;
    let tg = cfg.time_grid()?;
    let mut dir = open(cfg, out)?;

    let mut basis = Table::new(&["mode", "eigenvalue", "sup_norm"]);
    for (i, l, s) in basis_table(&setup.basis) {
        basis.push(vec![i as f64, l, s]);
    }
    dir.csv("basis.csv", &basis)?;
    dir.json("spectral.json", &setup.spectral)?;

    let results: Vec<CliResult<_>> = (0..cfg.ensemble.size)
        .into_par_iter()
        .map(|k| {
            let p = model::problem(cfg, &setup, &hs, tg, k)?;
            Ok((solve(&p)?, p.noise.seed))
        })
        .collect();
    let mut checks = Vec::new();
    for (k, r) in results.into_iter().enumerate() {
        let (traj, seed) = r?;
        let mut t = Table::new(&["step", "time", "l2_norm", "h1_seminorm"]);
        for (n, ((time, l2), h1)) in traj.times.iter().zip(&traj.l2_norms).zip(&traj.h1_seminorms).enumerate() {
            t.push(vec![n as f64, *time, *l2, *h1]);
        }
        dir.csv(&format!("trajectory_{k:04}.csv"), &t)?;
        if cfg.output.snapshots {
            let d = setup.grid.dimension;
            let mut names: Vec<String> = ["x", "y", "z"][..d].iter().map(|s| s.to_string()).collect();
            names.extend((0..traj.fields.len()).map(|n| format!("u_{n}")));
            let refs: Vec<&str> = names.iter().map(String::as_str).collect();
            let mut snap = Table::new(&refs);
            for (i, x) in setup.grid.coordinates() {
                let mut row = x.to_vec();
                row.extend(traj.fields.iter().map(|f| f[i]));
                snap.push(row);
            }
            dir.columns(&format!("trajectory_{k:04}.bin"), &snap)?;
        }
        checks.push(Check::new(
            format!("trajectory-{k}"),
            traj.is_complete(),
            format!("noise seed {seed}, status {:?}", traj.status),
        ));
    }
    finish(dir, "simulate", checks, start)
}

#[derive(Serialize)]
struct SuiteJson<'a> {
    suite: Suite,
    pass: bool,
    checks: &'a [Check],
}

/// Runs the named suites in order.
pub fn verify(cfg: &ExperimentConfig, suites_to_run: &[Suite], out: &Path) -> CliResult<RunManifest> {
    let start = Instant::now();
    cfg.validate()?;
    if suites_to_run.is_empty() {
        return Err(CliError::Usage("no suite given".into()));
    }
    let reports = suites_to_run.iter().map(|&s| suites::run(cfg, s)).collect::<CliResult<Vec<_>>>()?;
    let mut dir = open(cfg, out)?;
    let mut checks = Vec::new();
    for r in &reports {
        for (name, t) in &r.tables {
            dir.csv(&format!("{}_{name}.csv", r.suite), t)?;
        }
        dir.json(&format!("{}_report.json", r.suite), &SuiteJson { suite: r.suite, pass: r.pass, checks: &r.checks })?;
        checks.extend(r.checks.iter().map(|c| Check { name: format!("{}/{}", r.suite, c.name), ..c.clone() }));
    }
    finish(dir, "verify", checks, start)
}

/// Classical RK4 reference for `y' = g(y)`.
fn ode_reference(g: ScalarFunction, y0: f64, tg: TimeGrid) -> Vec<f64> {
    const SUB: usize = 64;
    let h = tg.dt() / SUB as f64;
    let mut y = y0;
    let mut out = vec![y0];
    for _ in 0..tg.n_steps() {
        for _ in 0..SUB {
            let k1 = g.eval(y);
            let k2 = g.eval(y + 0.5 * h * k1);
            let k3 = g.eval(y + 0.5 * h * k2);
            let k4 = g.eval(y + h * k3);
            y += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        }
        out.push(y);
    }
    out
}

fn ls_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    sxy / sxx
}

/// Simultaneous `(dt, mesh)` refinement on subdivided fixed noise.
pub fn convergence(cfg: &ExperimentConfig, levels: usize, out: &Path) -> CliResult<RunManifest> {
    let start = Instant::now();
    if levels < 2 {
        return Err(CliError::Usage(format!("convergence needs at least 2 levels, got {levels}")));
    }
    cfg.validate()?;
    let base = Setup::build(cfg)?;
    base.gate(cfg)?;
    let top = levels - 1;
    let growth = 1usize << (cfg.domain.dimension * top);
    check_memory(cfg, base.grid.n_nodes() * growth, cfg.time.n_steps << top)?;

    let hs = cfg.hurst_sequence()?;
    let noise = sample_noise(Arc::clone(&base.basis), &hs, cfg.time_grid()?, model::member_seed(cfg.seed, 0))?;
    let deterministic = NonlinearitySpec { h: ScalarFunction::Zero, ..cfg.nonlinearity };
    let y0 = 1.0;

    let mut det = Table::new(&["level", "resolution", "steps", "nodes", "dt", "error"]);
    let mut noisy = Table::new(&["level", "resolution", "steps", "nodes", "l2_final", "h1_final", "residual", "l2_change"]);
    let mut prev_l2: Option<f64> = None;
    for l in 0..levels {
        let setup = if l == 0 { base.clone() } else { Setup::at_resolution(cfg, cfg.domain.resolution / (1 << l) as f64, cfg.basis.modes)? };
        let nodes = setup.grid.n_nodes();
        let lnoise = noise.subdivided(1 << l).with_basis(Arc::clone(&setup.basis))?;
        let tg = lnoise.grid;
        let mut p = Problem {
            grid: Arc::clone(&setup.grid),
            coefficient: cfg.coefficient,
            nonlinearity: deterministic,
            initial: vec![y0; nodes],
            noise: lnoise,
            tolerance: cfg.solver.tolerance,
        };
        let traj = solve(&p)?;
        let reference = ode_reference(cfg.nonlinearity.g, y0, tg);
        let measure: f64 = setup.grid.masses().iter().sum();
        let mut err = 0.0f64;
        for (u, y) in traj.fields.iter().zip(&reference) {
            let d: Vec<f64> = u.iter().map(|x| x - y).collect();
            err = err.max(l2_norm(&setup.grid, &d)? / measure.sqrt());
        }
        det.push(vec![l as f64, setup.grid.resolution, tg.n_steps() as f64, nodes as f64, tg.dt(), err]);

        p.nonlinearity = cfg.nonlinearity;
        p.initial = cfg.initial.realize(&setup.grid, &setup.basis, model::initial_seed(cfg.seed, 0))?;
        let traj = solve(&p)?;
        let last = traj.final_field();
        let l2 = l2_norm(&setup.grid, last)?;
        let h1 = h1_seminorm(&setup.grid, last)?;
        let v = if setup.basis.len() > 1 { setup.basis.vectors[1].clone() } else { vec![1.0; nodes] };
        let res = variational_residual(&traj, &p, &v, &TimeProfile::Linear { intercept: 0.0, slope: 1.0 }, tg.horizon())?;
        noisy.push(vec![
            l as f64,
            setup.grid.resolution,
            tg.n_steps() as f64,
            nodes as f64,
            l2,
            h1,
            res.residual,
            prev_l2.map(|q| (l2 - q).abs()).unwrap_or(f64::NAN),
        ]);
        prev_l2 = Some(l2);
    }
    let dts = det.column("dt").unwrap();
    let errs = det.column("error").unwrap();
    let slope = if errs.iter().all(|e| *e > 0.0) {
        ls_slope(&dts.iter().map(|x| x.ln()).collect::<Vec<_>>(), &errs.iter().map(|x| x.ln()).collect::<Vec<_>>())
    } else {
        f64::NAN
    };
    let changes: Vec<f64> = noisy.column("l2_change").unwrap().into_iter().filter(|x| x.is_finite()).collect();
    let noisy_slope = if changes.len() >= 2 && changes.iter().all(|c| *c > 0.0) {
        (changes[0] / changes[changes.len() - 1]).log2() / (changes.len() - 1) as f64
    } else {
        f64::NAN
    };
    let mut dir = open(cfg, out)?;
    dir.csv("convergence_deterministic.csv", &det)?;
    dir.csv("convergence_noise.csv", &noisy)?;
    let checks = vec![Check::new(
        "deterministic-order",
        (0.8..=1.2).contains(&slope),
        format!("h = 0, constant initial value {y0}: fitted dt-slope {slope:.4} over {levels} levels; noise-on L2 change slope {noisy_slope:.3} (descriptive)"),
    )];
    finish(dir, "convergence", checks, start)
}

/// Raw fBm paths as CSV and as a column file.
pub fn fbm_sample(cfg: &ExperimentConfig, hurst: f64, steps: usize, count: usize, method: FbmMethod, out: &Path) -> CliResult<RunManifest> {
    let start = Instant::now();
    if count == 0 {
        return Err(CliError::Usage("count must be at least 1".into()));
    }
    let tg = TimeGrid::new(cfg.time.horizon, steps)?;
    let sampler = FbmSampler::new(hurst, tg, method)?;
    let paths = sampler.sample_many(count, rng::derive_seed(cfg.seed, &[stream::NOISE, hurst.to_bits()]));
    let mut names = vec!["t".to_string()];
    names.extend((0..count).map(|k| format!("path_{k}")));
    let refs: Vec<&str> = names.iter().map(String::as_str).collect();
    let mut t = Table::new(&refs);
    for (n, time) in tg.nodes().into_iter().enumerate() {
        let mut row = vec![time];
        row.extend(paths.iter().map(|p| p.values[n]));
        t.push(row);
    }
    let mut dir = open(cfg, out)?;
    dir.csv("fbm.csv", &t)?;
    dir.columns("fbm.bin", &t)?;
    finish(dir, "fbm-sample", Vec::new(), start)
}

/// `∫_0^∞ b` for the configured 2-D domain when it has a closed form.
fn closed_form_measure(curve: &BoundaryCurve) -> Option<f64> {
    match *curve {
        BoundaryCurve::StretchedExp { scale, delta } => {
            let m = 1.0 + delta;
            Some(scale * statrs::function::gamma::gamma(1.0 + 1.0 / m))
        }
        BoundaryCurve::Exp { scale, rate } => Some(scale / rate),
        BoundaryCurve::Power { scale, power } if power > 1.0 => Some(scale / (power - 1.0)),
        BoundaryCurve::Power { .. } => None,
    }
}

/// Curve admissibility for the configured curve and two reference curves,
/// plus the measure of the 2-D domain under refinement.
pub fn domain_check(cfg: &ExperimentConfig, out: &Path) -> CliResult<RunManifest> {
    let start = Instant::now();
    let curves = [
        ("configured", cfg.domain.curve, None),
        ("exp(-x^1.5)", BoundaryCurve::StretchedExp { scale: 1.0, delta: 0.5 }, Some(true)),
        ("exp(-x)", BoundaryCurve::Exp { scale: 1.0, rate: 1.0 }, Some(false)),
    ];
    let mut checks = Vec::new();
    let mut reports = Vec::new();
    for (label, c, expect) in curves {
        let r = validate_curve(&c, &DEFAULT_EPSILONS, DEFAULT_S_MAX)?;
        let detail = if r.reasons.is_empty() { "admissible".to_string() } else { r.reasons.join("; ") };
        checks.push(Check::new(format!("curve-{label}"), expect.is_none_or(|e| e == r.admissible), detail));
        reports.push((label, c, r));
    }

    let mut measure = Table::new(&["resolution", "nodes", "grid_measure", "tail", "total", "exact", "error"]);
    let exact = closed_form_measure(&cfg.domain.curve).unwrap_or(f64::NAN);
    let mut errors = Vec::new();
    for l in 0..3 {
        let r = cfg.domain.resolution / (1 << l) as f64;
        let g = build_grid(&cfg.domain.curve, 2, cfg.domain.length, r)?;
        let inside: f64 = g.masses().iter().sum();
        let total = inside + g.tail_measure;
        errors.push((total - exact).abs());
        measure.push(vec![r, g.n_nodes() as f64, inside, g.tail_measure, total, exact, (total - exact).abs()]);
    }
    let finest = *errors.last().unwrap();
    checks.push(Check::new(
        "measure-2d",
        finest <= 1e-3,
        format!("grid measure plus tail vs closed form {exact:.9}: errors {}", suites::sci(&errors)),
    ));

    let mut dir = open(cfg, out)?;
    #[derive(Serialize)]
    struct CurveJson<'a> {
        label: &'a str,
        curve: BoundaryCurve,
        report: &'a hornspde::domain::CurveReport,
    }
    let json: Vec<CurveJson> = reports.iter().map(|(label, curve, report)| CurveJson { label, curve: *curve, report }).collect();
    #[derive(Serialize)]
    struct Curves<'a> {
        curves: Vec<CurveJson<'a>>,
    }
    dir.json("curves.json", &Curves { curves: json })?;
    dir.csv("measure.csv", &measure)?;
    finish(dir, "domain-check", checks, start)
}

/// Recomputes the GRR constant from the frozen corpus design (its own seed,
/// not the config seed) and compares it with the frozen value.
pub fn calibrate(cfg: &ExperimentConfig, paths: usize, out: &Path) -> CliResult<RunManifest> {
    let start = Instant::now();
    let frozen = calibration::frozen()?;
    let spec = CalibrationSpec { paths_per_hurst: paths, ..CalibrationSpec::default() };
    let cal = calibration::calibrate(&spec)?;
    let mut dir = open(cfg, out)?;
    dir.text("grr_calibration.toml", &toml::to_string_pretty(&cal).map_err(|e| CliError::Config(e.to_string()))?)?;
    let same_design = paths == frozen.paths_per_hurst;
    let checks = vec![Check::new(
        "calibration",
        if same_design { cal.c_t == frozen.c_t } else { cal.c_t.is_finite() && cal.c_t > 0.0 },
        format!("c_T = {} (binding {}), frozen c_T = {}{}", cal.c_t, cal.binding, frozen.c_t, if same_design { "" } else { "; corpus size differs from the frozen design" }),
    )];
    finish(dir, "calibrate", checks, start)
}
