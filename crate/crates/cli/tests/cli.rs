use std::fs;
use std::path::Path;

use tsinfo_cli::{run, EXIT_CONFIG, EXIT_GUARD, EXIT_OK, EXIT_SUITE};

fn write(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

fn tsinfo(args: &[&str]) -> i32 {
    run(std::iter::once("tsinfo").chain(args.iter().copied()))
}

#[test]
fn oracle_reports_symmetric_chain_information() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    write(d, "chain.json", r#"{"n_states": 2, "transition": [0.9, 0.1, 0.1, 0.9]}"#);
    write(d, "id.json", r#"{"kind": "lookup_table", "alphabet_size": 2, "table": [0, 1]}"#);
    let cfg = write(d, "oracle.json", r#"{"chain": "chain.json", "representation": "id.json", "max_k": 3}"#);
    let out = d.join("out");
    assert_eq!(tsinfo(&["oracle", "--config", &cfg, "--out", out.to_str().unwrap()]), EXIT_OK);
    let table = fs::read_to_string(out.join("oracle.csv")).unwrap();
    let mut lines = table.lines();
    assert_eq!(lines.next(), Some("k,I_k,h_k,sandwich_lower,sandwich_upper"));
    assert!(lines.next().unwrap().starts_with("1,0.531004,0.468996,"));
    assert_eq!(table.lines().count(), 4);
    let pi = fs::read_to_string(out.join("stationary.csv")).unwrap();
    assert_eq!(pi, "state,probability\n0,0.500000\n1,0.500000\n");
    let ci: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("ci.json")).unwrap()).unwrap();
    assert_eq!(ci["holds"], true);
}

#[test]
fn gen_sample_select_pipeline() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    let gen = write(
        d,
        "gen.json",
        r#"{"kind": "ideal_chain", "recipe": {
            "label_transition": [[0.9, 0.1], [0.1, 0.9]],
            "preimage_sizes": [2, 2],
            "emission_weights": [[0.5, 0.5], [0.5, 0.5]]}}"#,
    );
    let specs = d.join("specs");
    assert_eq!(tsinfo(&["gen", "--config", &gen, "--out", specs.to_str().unwrap()]), EXIT_OK);
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(specs.join("gen.json")).unwrap()).unwrap();
    assert!((summary["gamma"].as_f64().unwrap() - 0.8).abs() < 1e-9);

    let sample = write(d, "sample.json", r#"{"chain": "specs/chain.json", "n": 50000}"#);
    let series = d.join("series");
    assert_eq!(tsinfo(&["sample", "--config", &sample, "--seed", "3", "--out", series.to_str().unwrap()]), EXIT_OK);

    let select = write(
        d,
        "select.json",
        r#"{"series": "series/series-3.txt", "family": {"exhaustive": {"n_states": 4, "alphabet_size": 2}}}"#,
    );
    let out = d.join("sel");
    assert_eq!(tsinfo(&["select", "--config", &select, "--k", "1", "--out", out.to_str().unwrap()]), EXIT_OK);
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("selection.json")).unwrap()).unwrap();
    // (0,0,1,1) and its complement are the two CI maps
    assert_eq!(report["best_index"], 3);
    assert_eq!(report["equivalence_class"], serde_json::json!([3, 12]));
    assert_eq!(report["seed"], 3);
    let csv = fs::read_to_string(out.join("selection.csv")).unwrap();
    assert_eq!(csv.lines().count(), 17);
    assert!(csv.lines().nth(1).unwrap().starts_with("0,0.00000,1,false"));

    let est = d.join("est");
    assert_eq!(tsinfo(&["estimate", "--config", &select, "--schedule", "--out", est.to_str().unwrap()]), EXIT_OK);
    let csv = fs::read_to_string(est.join("estimates.csv")).unwrap();
    let k = tsinfo::estimators::schedule_k(50_000, 2);
    assert!(csv.lines().skip(1).all(|l| l.split(',').nth(3) == Some(k.to_string().as_str())));
}

#[test]
fn sampling_is_byte_deterministic() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    write(
        d,
        "mdp.json",
        r#"{"n_states": 2, "n_actions": 2, "transition": [0.9, 0.1, 0.3, 0.7, 0.2, 0.8, 0.6, 0.4]}"#,
    );
    let cfg = write(d, "sample.json", r#"{"mdp": "mdp.json", "n": 1000}"#);
    let (a, b) = (d.join("a"), d.join("b"));
    for out in [&a, &b] {
        assert_eq!(tsinfo(&["sample", "--config", &cfg, "--seed", "5", "--seed", "6", "--out", out.to_str().unwrap()]), 0);
    }
    for name in ["series-5.txt", "series-6.txt"] {
        let x = fs::read(a.join(name)).unwrap();
        assert_eq!(x, fs::read(b.join(name)).unwrap());
        let text = String::from_utf8(x).unwrap();
        assert!(text.lines().skip(1).all(|l| l.split('\t').count() == 2));
    }
    assert_ne!(fs::read(a.join("series-5.txt")).unwrap(), fs::read(a.join("series-6.txt")).unwrap());
}

#[test]
fn bound_tables() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    let cfg = write(
        d,
        "bound.json",
        r#"{"grid": {"d": [1], "epsilon": [0.1, 24.0], "n": [10000, 100000000], "gamma": [0.9],
            "k": [1], "alphabet_size": [2]}, "target": 0.05}"#,
    );
    let out = d.join("out");
    assert_eq!(tsinfo(&["bound", "--config", &cfg, "--out", out.to_str().unwrap()]), EXIT_OK);
    let bounds = fs::read_to_string(out.join("bounds.csv")).unwrap();
    assert_eq!(bounds.lines().count(), 5);
    assert!(bounds.starts_with("d,epsilon,n,gamma,k,alphabet_size,bound,vacuous,crossover_n\n"));
    let plan = fs::read_to_string(out.join("required_n.csv")).unwrap();
    let rows: Vec<&str> = plan.lines().skip(1).collect();
    assert_eq!(rows.len(), 2);
    assert!(rows[0].ends_with(",false"), "{}", rows[0]);
    assert!(rows[1].ends_with(",true"), "{}", rows[1]);
}

#[test]
fn exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    let out = d.join("out");
    let out = out.to_str().unwrap();
    assert_eq!(tsinfo(&["oracle", "--out", out]), EXIT_CONFIG);
    assert_eq!(tsinfo(&["frobnicate"]), EXIT_CONFIG);
    assert_eq!(tsinfo(&["select", "--k", "1", "--schedule"]), EXIT_CONFIG);
    assert_eq!(tsinfo(&["verify", "--suite", "nope", "--out", out]), EXIT_CONFIG);
    let bad = write(d, "bad.json", "{not json");
    assert_eq!(tsinfo(&["gen", "--config", &bad, "--out", out]), EXIT_CONFIG);
    let reducible = write(d, "gen.json", r#"{"kind": "ideal_chain", "recipe": {
        "label_transition": [[1.0, 0.0], [0.0, 1.0]], "preimage_sizes": [1, 1],
        "emission_weights": [[1.0], [1.0]]}}"#);
    assert_eq!(tsinfo(&["gen", "--config", &reducible, "--out", out]), EXIT_CONFIG);

    write(d, "s.txt", "0\n1\n0\n1\n");
    let huge = write(d, "select.json", r#"{"series": "s.txt", "family": {"exhaustive": {"n_states": 30, "alphabet_size": 2}}}"#);
    assert_eq!(tsinfo(&["select", "--config", &huge, "--out", out]), EXIT_GUARD);

    let strict = write(
        d,
        "verify.json",
        r#"{"estimator_seeds": 1, "estimator_lengths": [1000], "estimator_tolerances": [1e-12], "estimator_required": 1}"#,
    );
    assert_eq!(tsinfo(&["verify", "--suite", "estimator", "--config", &strict, "--out", out]), EXIT_SUITE);
    let failures = fs::read_to_string(Path::new(out).join("failures.txt")).unwrap();
    assert!(failures.contains("estimator"));
    assert_eq!(tsinfo(&["--help"]), EXIT_OK);
}
