use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_nonlocal-cvp"));
    c.env_remove("NONLOCAL_CVP_SEED");
    c
}

fn run(args: &[&str], out: &Path) -> Output {
    bin().args(args).arg("--out").arg(out).output().unwrap()
}

fn report(out: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(out.join("report.json")).unwrap()).unwrap()
}

#[test]
fn constants_command() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["constants", "--d", "1", "--alpha", "1"], dir.path());
    assert_eq!(o.status.code(), Some(0));
    let r = report(dir.path());
    let c = &r["results"]["constants"][0];
    assert_eq!(c["name"], "C_d_alpha");
    assert!((c["value"].as_f64().unwrap() - std::f64::consts::FRAC_1_PI).abs() < 1e-10);
    assert!(c["abs_gap"].as_f64().unwrap() < 1e-8);
    assert_eq!(r["seed"], 0);
    assert!(r["versions"]["nonlocal-core"].is_string());
    assert!(r["provenance"]["C_d_alpha"].as_str().unwrap().contains("quadrature"));
    let csv = std::fs::read_to_string(dir.path().join("constants.csv")).unwrap();
    assert!(csv.starts_with("name,d,parameter,value,quadrature_value,abs_gap\n"));
    assert!(!csv.contains('\r'));
}

#[test]
fn malformed_json_writes_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.json");
    std::fs::write(&cfg, "{\"command\": \"solve\",").unwrap();
    let out = dir.path().join("out");
    let o = run(&["--config", cfg.to_str().unwrap()], &out);
    assert_eq!(o.status.code(), Some(2));
    assert!(!out.exists());
}

#[test]
fn unknown_keys_are_config_errors() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    for text in [
        r#"{"command":"constants","constant":{"d":1}}"#,
        r#"{"command":"eigs","kernel":{"family":"fractional","alpha":1,"normalization":"exact_c","extra":1}}"#,
        r#"{"command":"eigs","domain":{"n":16,"collar_r":1}}"#,
    ] {
        let cfg = dir.path().join("c.json");
        std::fs::write(&cfg, text).unwrap();
        let o = run(&["--config", cfg.to_str().unwrap()], &out);
        assert_eq!(o.status.code(), Some(2), "{text}");
    }
    assert!(!out.exists());
}

#[test]
fn out_of_range_parameters_are_config_errors() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let o = run(&["eigs", "--alpha", "2.5"], &out);
    assert_eq!(o.status.code(), Some(2));
    let o = run(&["eigs", "--alpha", "1", "--n", "2"], &out);
    assert_eq!(o.status.code(), Some(2));
    assert!(!out.exists());
}

#[test]
fn incompatible_neumann_exits_3_with_report() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(
        &["solve", "--alpha", "1", "--n", "16", "--kind", "neumann", "--f", r#"{"name":"constant","value":1}"#],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(3));
    let r = report(dir.path());
    assert_eq!(r["status"], "numerical_failure");
    assert_eq!(r["error"]["kind"], "incompatible");
    assert!(r["error"]["detail"]["condition"].as_str().unwrap().contains("compatibility condition"));
    assert!((r["error"]["detail"]["residual"].as_f64().unwrap() - 1.0).abs() < 1e-12);
    assert!(!dir.path().join("solution.csv").exists());
}

#[test]
fn compatible_neumann_solves() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(
        &["solve", "--alpha", "1.5", "--n", "32", "--kind", "neumann", "--f", r#"{"name":"cos","freq":3.141592653589793}"#],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let r = report(dir.path());
    assert!(r["results"]["residual"].as_f64().unwrap() < 1e-10);
    let csv = std::fs::read_to_string(dir.path().join("solution.csv")).unwrap();
    assert_eq!(csv.lines().next(), Some("node,tag,x,value"));
}

#[test]
fn failed_sweep_verdict_exits_4() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["sweep", "poincare", "--n", "32"], dir.path());
    assert_eq!(o.status.code(), Some(4));
    assert_eq!(report(dir.path())["status"], "verdict_failed");
    assert!(dir.path().join("sweep_poincare.csv").exists());
}

#[test]
fn bad_seed_is_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = bin()
        .env("NONLOCAL_CVP_SEED", "seven")
        .args(["constants", "--out"])
        .arg(dir.path().join("o"))
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
    let o = bin()
        .env("NONLOCAL_CVP_SEED", "7")
        .args(["constants", "--out"])
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(report(dir.path())["seed"], 7);
}

#[test]
fn config_and_flags_agree() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.json");
    std::fs::write(
        &cfg,
        r#"{"command":"eigs","kernel":{"family":"fractional","alpha":1.2,"normalization":"exact_c"},
            "domain":{"n":24},"spectrum":{"condition":"dirichlet","k":3}}"#,
    )
    .unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    assert_eq!(run(&["--config", cfg.to_str().unwrap(), "--threads", "2"], &a).status.code(), Some(0));
    assert_eq!(
        run(&["eigs", "--alpha", "1.2", "--n", "24", "--condition", "dirichlet", "--k", "3"], &b).status.code(),
        Some(0)
    );
    let ea = std::fs::read(a.join("eigenvalues.csv")).unwrap();
    let eb = std::fs::read(b.join("eigenvalues.csv")).unwrap();
    assert_eq!(ea, eb);
    assert_eq!(report(&a)["threads"], 2);
}

#[test]
fn mismatched_command_is_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.json");
    std::fs::write(&cfg, r#"{"command":"eigs"}"#).unwrap();
    let o = run(&["--config", cfg.to_str().unwrap(), "constants"], &dir.path().join("o"));
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn tabulated_function_file() {
    let dir = tempfile::tempdir().unwrap();
    let table = dir.path().join("f.csv");
    std::fs::write(&table, "x,y\n-1,0\n0,1\n1,0\n").unwrap();
    let spec = format!(r#"{{"file":"{}"}}"#, table.display());
    let o = run(
        &["solve", "--alpha", "1", "--n", "16", "--kind", "dirichlet", "--f", &spec],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let o = run(
        &["solve", "--alpha", "1", "--n", "16", "--kind", "dirichlet", "--f", r#"{"file":"/nonexistent.csv"}"#],
        &dir.path().join("missing"),
    );
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn other_commands_produce_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let cases: [(&[&str], &[&str]); 4] = [
        (&["apply", "--alpha", "1", "--u", r#"{"name":"gaussian"}"#, "--points", "0,0.5,1"], &["apply.csv"]),
        (
            &["evolve", "--alpha", "1.5", "--n", "16", "--equation", "wave", "--u0", r#"{"name":"cos","freq":3}"#, "--samples", "4"],
            &["trajectory.csv"],
        ),
        (&["dtn", "--alpha", "1.5", "--n", "16"], &["dtn.mtx", "dtn_nodes.csv"]),
        (&["sweep", "coefficient"], &["sweep_coefficient.csv"]),
    ];
    for (args, files) in cases {
        let out = d.join(args[0]);
        let o = run(args, &out);
        assert_eq!(o.status.code(), Some(0), "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
        for f in files {
            assert!(out.join(f).exists(), "{f}");
        }
        let r = report(&out);
        assert_eq!(r["status"], "ok");
        assert!(r["config"].is_object());
    }
    let r = report(&d.join("sweep"));
    assert!((r["results"]["value"].as_f64().unwrap() - 2.0).abs() < 1e-4);
}
