//! One line per acceptance criterion, each at its stated tolerance.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use tsinfo::verify::{run_suite, SuiteReport, VerifyConfig};

const SEED: u64 = 0;

struct Outcome {
    passed: bool,
    detail: String,
}

fn suite(name: &str, limit: Duration) -> Outcome {
    let start = Instant::now();
    let report: SuiteReport = match run_suite(name, &VerifyConfig::default(), SEED) {
        Ok(r) => r,
        Err(e) => return Outcome { passed: false, detail: format!("{name} errored: {e}") },
    };
    let elapsed = start.elapsed();
    let mut detail = format!("{} [{} checks, {:.1}s]", report.detail, report.checks, elapsed.as_secs_f64());
    for f in &report.failures {
        detail.push_str(&format!("\n      {f}"));
    }
    Outcome { passed: report.passed && elapsed <= limit, detail }
}

fn h2(p: f64) -> f64 {
    -(p * p.ln() + (1.0 - p) * (1.0 - p).ln()) / std::f64::consts::LN_2
}

fn estimator_consistency() -> Outcome {
    let mut out = suite("estimator", Duration::from_secs(60));
    let spec = tsinfo::MarkovChainSpec::from_rows(&[vec![0.9, 0.1], vec![0.1, 0.9]]).unwrap();
    let exact = tsinfo::oracle::exact_ik(&spec, &tsinfo::RepresentationFunction::identity(2), 1).unwrap();
    let ok = (exact - (1.0 - h2(0.1))).abs() < 1e-12 && (exact - 0.531004).abs() < 5e-7;
    out.passed &= ok;
    out
}

fn bound_arithmetic() -> Outcome {
    let mut out = suite("bounds", Duration::from_secs(300));
    let got = tsinfo::bounds::delta_bound(1.0, 0.1, 10_000, 0.9).unwrap().value;
    let direct = 1e4 * 0.9f64.powf(100.0) + 8.0 * 1e4 * (-(100.0 * 0.01) / 8.0f64).exp();
    let reference = 7.0601e4 + 0.2656;
    out.passed &= (got - direct).abs() / direct < 1e-12 && (got - reference).abs() / reference <= 1e-3;
    out.detail = format!("delta = {got:.4} (reference {reference}); {}", out.detail);
    out
}

fn read_tree(root: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in fs::read_dir(&dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                let rel = path.strip_prefix(root).unwrap().display().to_string();
                out.insert(rel, fs::read(&path).unwrap());
            }
        }
    }
    out
}

fn determinism() -> Outcome {
    let tmp = tempfile::tempdir().unwrap();
    let runs: Vec<_> = ["a", "b"]
        .iter()
        .map(|name| {
            let dir = tmp.path().join(name);
            let code = tsinfo_cli::run(["tsinfo", "verify", "--seed", "0", "--seed", "1", "--out", dir.to_str().unwrap()]);
            (code, read_tree(&dir))
        })
        .collect();
    let (code_a, a) = &runs[0];
    let (code_b, b) = &runs[1];
    let identical = a == b;
    Outcome {
        passed: *code_a == 0 && *code_b == 0 && identical && !a.is_empty(),
        detail: format!(
            "{} artifacts over seeds 0 and 1, exit codes {code_a}/{code_b}, byte-identical: {identical}",
            a.len()
        ),
    }
}

fn main() -> ExitCode {
    let criteria: Vec<(&str, Box<dyn Fn() -> Outcome>)> = vec![
        ("ideal-construction round trip", Box::new(|| suite("ideal-ci", Duration::from_secs(60)))),
        ("CI equals information maximality", Box::new(|| suite("ci-equality", Duration::from_secs(300)))),
        ("Markov collapse", Box::new(|| suite("markov-collapse", Duration::from_secs(300)))),
        ("estimator consistency", Box::new(estimator_consistency)),
        ("continuity bound non-violation", Box::new(|| suite("continuity", Duration::from_secs(300)))),
        ("recovery experiment", Box::new(|| suite("recovery", Duration::from_secs(120)))),
        ("policy invariance", Box::new(|| suite("policy-invariance", Duration::from_secs(300)))),
        ("active selection", Box::new(|| suite("active", Duration::from_secs(300)))),
        ("bound arithmetic and monotonicity", Box::new(bound_arithmetic)),
        ("determinism", Box::new(determinism)),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let outcome = check();
        failed += !outcome.passed as usize;
        println!("criterion {:>2} {}: {} - {}", i + 1, if outcome.passed { "PASS" } else { "FAIL" }, name, outcome.detail);
    }
    println!("acceptance: {}/{} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 { ExitCode::SUCCESS } else { ExitCode::FAILURE }
}
