//! Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any
//! criterion fails.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::process::ExitCode;
use std::time::Instant;

use hornspde::FbmMethod;
use hornspde_cli::commands::{self, MANIFEST};
use hornspde_cli::{Check, ExperimentConfig, RunManifest, Suite, SuiteReport};

struct Line {
    id: usize,
    title: &'static str,
    checks: Vec<Check>,
}

impl Line {
    fn pass(&self) -> bool {
        !self.checks.is_empty() && self.checks.iter().all(|c| c.pass)
    }
}

fn pick(report: &SuiteReport, names: &[&str]) -> Vec<Check> {
    names
        .iter()
        .map(|n| report.check(n).cloned().unwrap_or_else(|| Check::new(*n, false, "check missing from suite report")))
        .collect()
}

/// Every output file except the manifest, plus the manifest with its
/// wall-clock field removed.
fn snapshot(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    for e in fs::read_dir(dir).expect("output dir") {
        let p = e.expect("entry").path();
        let name = p.file_name().unwrap().to_string_lossy().into_owned();
        let bytes = fs::read(&p).expect("read output");
        if name == MANIFEST {
            let mut v: serde_json::Value = serde_json::from_slice(&bytes).expect("manifest json");
            v.as_object_mut().unwrap().remove("wall_clock_seconds");
            out.insert(name, serde_json::to_vec(&v).unwrap());
        } else {
            out.insert(name, bytes);
        }
    }
    out
}

fn determinism(cfg: &ExperimentConfig) -> Vec<Check> {
    let root = tempfile::tempdir().expect("tempdir");
    let mut cfg = cfg.clone();
    cfg.ensemble.size = 1;
    cfg.output.snapshots = true;
    type Cmd = Box<dyn Fn(&ExperimentConfig, &Path) -> hornspde_cli::CliResult<RunManifest>>;
    let cmds: Vec<(&str, Cmd)> = vec![
        ("simulate", Box::new(commands::simulate)),
        ("verify", Box::new(|c: &ExperimentConfig, o: &Path| commands::verify(c, &[Suite::Embedding, Suite::Residual, Suite::Uniqueness], o))),
        ("convergence", Box::new(|c: &ExperimentConfig, o: &Path| commands::convergence(c, 2, o))),
        ("fbm-sample", Box::new(|c: &ExperimentConfig, o: &Path| commands::fbm_sample(c, 0.7, 256, 8, FbmMethod::Cholesky, o))),
        ("domain-check", Box::new(commands::domain_check)),
    ];
    cmds.iter()
        .map(|(name, run)| {
            let a = root.path().join(format!("{name}-a"));
            let b = root.path().join(format!("{name}-b"));
            let ok = run(&cfg, &a).is_ok() && run(&cfg, &b).is_ok();
            let (sa, sb) = if ok { (snapshot(&a), snapshot(&b)) } else { Default::default() };
            let same = ok && sa == sb;
            let differing: Vec<&String> = sa.keys().filter(|k| sa.get(*k) != sb.get(*k)).collect();
            Check::new(
                format!("rerun-{name}"),
                same,
                if !ok {
                    "command failed".to_string()
                } else if same {
                    format!("{} files identical", sa.len())
                } else {
                    format!("differing files: {differing:?}")
                },
            )
        })
        .collect()
}

fn main() -> ExitCode {
    let start = Instant::now();
    let cfg = ExperimentConfig::example();
    let suite = |s: Suite| hornspde_cli::suites::run(&cfg, s).unwrap_or_else(|e| panic!("suite {s} failed to run: {e}"));

    let noise = suite(Suite::Noise);
    let grr = suite(Suite::Grr);
    let lemma3 = suite(Suite::Lemma3);
    let embedding = suite(Suite::Embedding);
    let residual = suite(Suite::Residual);
    let uniqueness = suite(Suite::Uniqueness);
    let domain_dir = tempfile::tempdir().expect("tempdir");
    let domain = commands::domain_check(&cfg, domain_dir.path()).expect("domain-check runs");

    let lines = vec![
        Line { id: 1, title: "fBm law", checks: pick(&noise, &["fbm-law-H0.55", "fbm-law-H0.75", "fbm-law-H0.95"]) },
        Line { id: 2, title: "spectral condition gate", checks: pick(&noise, &["spectral-p-series", "spectral-mesh-stability"]) },
        Line { id: 3, title: "GRR inequality", checks: pick(&grr, &["grr-held-out"]) },
        Line {
            id: 4,
            title: "increment bound and moment uniformity",
            checks: pick(
                &grr,
                &["increment-bound", "lambda-chain-bound", "theta-moment-p1", "theta-moment-p2", "lambda-moment-p1", "lambda-moment-p2"],
            ),
        },
        Line { id: 5, title: "Young-integral domination", checks: pick(&lemma3, &["stieltjes-domination", "chain-rule"]) },
        Line { id: 6, title: "Hölder rate", checks: pick(&lemma3, &["holder-rate"]) },
        Line { id: 7, title: "embeddings", checks: pick(&embedding, &["increment-bound", "c-emp-stability"]) },
        Line { id: 8, title: "variational identity", checks: pick(&residual, &["residual-refinement", "mass-identity"]) },
        Line { id: 9, title: "uniqueness for affine h", checks: pick(&uniqueness, &["uniqueness-h=0", "uniqueness-h=1", "uniqueness-h=0.5u+1"]) },
        Line { id: 10, title: "domain admissibility", checks: domain.checks.clone() },
        Line { id: 11, title: "determinism", checks: determinism(&cfg) },
    ];

    let mut failed = 0;
    for l in &lines {
        let verdict = if l.pass() { "PASS" } else { "FAIL" };
        println!("criterion {:>2} {verdict}: {}", l.id, l.title);
        for c in &l.checks {
            println!("    {} {}: {}", if c.pass { "ok  " } else { "FAIL" }, c.name, c.detail);
        }
        failed += usize::from(!l.pass());
    }
    println!("{} of {} criteria passed ({:.0} s)", lines.len() - failed, lines.len(), start.elapsed().as_secs_f64());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
