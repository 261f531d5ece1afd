use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use errcalc_cli::document::{ModelDocument, Variable};
use errcalc_cli::load_document;
use proptest::prelude::*;
use serde_json::Value;

fn corpus() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("corpus")
}

fn tmp(name: &str) -> PathBuf {
    let dir = Path::new(env!("CARGO_TARGET_TMPDIR")).join("cli-tests");
    std::fs::create_dir_all(&dir).unwrap();
    dir.join(name)
}

fn errcalc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_errcalc"))
        .current_dir(corpus())
        .env_remove("ERRCALC_THREADS")
        .args(args)
        .output()
        .unwrap()
}

fn results(out: &Output) -> Value {
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    v["results"].clone()
}

fn f(v: &Value) -> f64 {
    v.as_f64().unwrap()
}

#[test]
fn propagate_square() {
    let r = results(&errcalc(&["propagate", "ok/square.json"]));
    assert_eq!(f(&r["value"][0]), 4.0);
    assert!((f(&r["gamma"][0][0]) - 0.16).abs() < 1e-15);
    assert!((f(&r["bias"][0]) - 0.01).abs() < 1e-15);
}

#[test]
fn report_envelope() {
    let out = errcalc(&["propagate", "ok/square.json", "--seed", "9"]);
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["seed"], 9);
    assert_eq!(v["version"], env!("CARGO_PKG_VERSION"));
    assert_eq!(v["command"]["name"], "propagate");
    assert_eq!(v["input_digest"].as_str().unwrap().len(), 64);
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("1.6000000000000000e-1"));
}

#[test]
fn digest_ignores_layout_and_key_order() {
    let a = tmp("layout_a.json");
    let b = tmp("layout_b.json");
    std::fs::write(&a, r#"{"variables":[{"name":"x","value":2.0,"variance":0.01}],"expressions":{"y":"x^2"}}"#).unwrap();
    std::fs::write(
        &b,
        "{\n  \"expressions\": {\"y\": \"x^2\"},\n  \"variables\": [\n    {\"variance\": 0.01, \"value\": 2.0, \"name\": \"x\"}\n  ]\n}\n",
    )
    .unwrap();
    let (_, da) = load_document(&a).unwrap();
    let (_, db) = load_document(&b).unwrap();
    assert_eq!(da, db);
    let (_, dc) = load_document(&corpus().join("ok/square.json")).unwrap();
    assert_ne!(da, dc);
}

#[test]
fn non_psd_covariance_names_the_eigenvalue() {
    let out = errcalc(&["propagate", "invalid/not_psd.json"]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("eigenvalue -1e0"), "{err}");
    assert!(out.stdout.is_empty());
}

#[test]
fn empty_expression_map_is_rejected() {
    let out = errcalc(&["propagate", "invalid/empty_expressions.json"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn identity_cluster_gives_unit_gamma() {
    let doc = tmp("identity.json");
    std::fs::write(
        &doc,
        r#"{"variables":[{"name":"x","value":0.5,"variance":1}],"expressions":{"y":"x"},"seed":4}"#,
    )
    .unwrap();
    let r = results(&errcalc(&["cluster", doc.to_str().unwrap(), "--points", "20000"]));
    let g = f(&r["estimate"]["gamma_hat"][0][0]);
    let se = f(&r["estimate"]["gamma_std_error"][0][0]);
    assert!((g - 1.0).abs() <= 3.0 * se, "{g} ± {se}");
    assert!(f(&r["comparison"]["max_z_score"]) <= 5.0);
}

#[test]
fn cluster_sweep_reports_rows() {
    let r = results(&errcalc(&[
        "cluster",
        "ok/exponential.json",
        "--sweep-points",
        "2000,8000",
        "--sweep-scales",
        "1e-3,1e-1",
        "--replicates",
        "4",
    ]));
    assert_eq!(r["convergence"]["rows"].as_array().unwrap().len(), 4);
    assert_eq!(r["convergence"]["best_scale"].as_array().unwrap().len(), 2);
}

#[test]
fn stochastic_reports_depend_only_on_the_seed() {
    let run = |seed: &str, threads: &str| {
        Command::new(env!("CARGO_BIN_EXE_errcalc"))
            .current_dir(corpus())
            .env("ERRCALC_THREADS", threads)
            .args(["cluster", "ok/transcendental.json", "--seed", seed])
            .output()
            .unwrap()
            .stdout
    };
    let a = run("5", "1");
    assert_eq!(a, run("5", "3"));
    assert_ne!(a, run("6", "1"));
}

#[test]
fn output_flag_writes_the_report() {
    let path = tmp("report.json");
    let out = errcalc(&["propagate", "ok/products.json", "--output", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    assert!(out.stdout.is_empty());
    let written = std::fs::read(&path).unwrap();
    assert_eq!(written, errcalc(&["propagate", "ok/products.json"]).stdout);
}

#[test]
fn zero_drift_scheme_gives_unit_bar_on_squares() {
    let r = results(&errcalc(&["bias", "ok/bias_zero_drift.json"]));
    let sq = r["functions"]
        .as_array()
        .unwrap()
        .iter()
        .find(|f| f["name"] == "y^2")
        .unwrap();
    let bar = sq["bar"].as_array().unwrap();
    let se = sq["bar_std_error"].as_array().unwrap();
    let within = bar
        .iter()
        .zip(se)
        .filter(|(b, s)| (f(b) - 1.0).abs() <= 3.0 * f(s))
        .count();
    assert!(within * 20 >= bar.len() * 19, "{within}/{}", bar.len());
    assert_eq!(r["locality"]["verdict"], "local");
}

#[test]
fn jump_scheme_is_non_local() {
    let r = results(&errcalc(&["bias", "ok/bias_jump.json"]));
    assert_eq!(r["locality"]["verdict"], "non_local");
    assert!(r["functions"][0]["closed_form_bar"].is_null());
}

#[test]
fn missing_blocks_are_usage_errors() {
    assert_eq!(errcalc(&["bias", "invalid/no_scheme.json"]).status.code(), Some(1));
    assert_eq!(errcalc(&["cluster", "invalid/no_cluster.json"]).status.code(), Some(1));
}

#[test]
fn process_examples() {
    let r = results(&errcalc(&["process", "bridge", "--s", "0.5", "--t", "0.5", "--K", "1024", "--samples", "20000"]));
    assert_eq!(f(&r["analytic"]), 0.25);
    let r = results(&errcalc(&["process", "string", "--l", "1", "--F", "1", "--T", "1", "--x", "0.5"]));
    assert_eq!(f(&r["value"]), 0.25);
    let r = results(&errcalc(&["process", "donsker", "--t", "0", "--K", "64", "--samples", "10000"]));
    assert_eq!(f(&r["estimated"][0][0]), 0.0);
    assert_eq!(f(&r["analytic"][0][0]), 0.0);
}

#[test]
fn help_and_version_exit_cleanly() {
    assert_eq!(errcalc(&["--help"]).status.code(), Some(0));
    assert_eq!(errcalc(&["--version"]).status.code(), Some(0));
    assert_eq!(errcalc(&[]).status.code(), Some(1));
}

#[test]
fn manifest_exit_codes() {
    let text = std::fs::read_to_string(corpus().join("manifest.json")).unwrap();
    let entries: Vec<Value> = serde_json::from_str(&text).unwrap();
    for e in entries {
        let args: Vec<&str> = e["args"].as_array().unwrap().iter().map(|a| a.as_str().unwrap()).collect();
        let out = errcalc(&args);
        assert_eq!(
            out.status.code(),
            Some(e["exit"].as_i64().unwrap() as i32),
            "{args:?}: {}",
            String::from_utf8_lossy(&out.stderr)
        );
    }
}

fn name_strategy() -> impl Strategy<Value = String> {
    "[a-z][a-z0-9_]{0,5}"
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn documents_round_trip_losslessly(
        vars in prop::collection::btree_map(name_strategy(), (-1e6f64..1e6, 0f64..10.0, -1f64..1.0), 1..4),
        seed in any::<u64>(),
    ) {
        let variables: Vec<Variable> = vars
            .iter()
            .map(|(n, &(value, variance, bias))| Variable {
                name: n.clone(),
                value,
                variance,
                bias,
                covariance: None,
            })
            .collect();
        let sum = vars.keys().cloned().collect::<Vec<_>>().join(" + ");
        let doc = ModelDocument {
            variables,
            expressions: [("total".to_owned(), sum)].into_iter().collect(),
            scheme: None,
            cluster: None,
            seed,
        };
        let text = doc.to_canonical_json();
        let back = ModelDocument::from_json(&text).unwrap();
        prop_assert_eq!(&back, &doc);
        prop_assert_eq!(back.to_canonical_json(), text);
    }
}
