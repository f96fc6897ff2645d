use std::io::Write;
use std::process::{Command, Output, Stdio};

use serde_json::Value;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_blockspec")).args(args).output().unwrap()
}

fn run_stdin(args: &[&str], input: &str) -> Output {
    let mut child = Command::new(env!("CARGO_BIN_EXE_blockspec"))
        .args(args)
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .unwrap();
    child.stdin.take().unwrap().write_all(input.as_bytes()).unwrap();
    child.wait_with_output().unwrap()
}

fn report(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| {
        panic!("{e}: {}", String::from_utf8_lossy(&out.stdout))
    })
}

fn write_temp(name: &str, text: &str) -> String {
    let dir = std::env::temp_dir().join(format!("blockspec-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path.to_string_lossy().into_owned()
}

const NIL: &str = r#"{"kind":"explicit","blocks":[[[[2,0]]],[[[0,0],[0,0]],[[3,0],[0,0]]]]}"#;

#[test]
fn spectrum_from_file() {
    let path = write_temp("nil.json", NIL);
    let out = run(&["spectrum", "--family", &path, "--truncate", "10"]);
    assert_eq!(out.status.code(), Some(0));
    let r = report(&out);
    assert_eq!(r["command"], "spectrum");
    assert_eq!(r["result"]["completeness"], "exact");
    let points = r["result"]["eigenvalues"].as_array().unwrap();
    assert_eq!(points.len(), 2);
    assert_eq!(r["input_digest"].as_str().unwrap().len(), 64);
}

#[test]
fn classify_continuous_point() {
    let out = run(&["classify", "--fixture", "diag_accumulating", "--tau", "1.0,0.0", "--truncate", "50"]);
    assert_eq!(out.status.code(), Some(0));
    let r = report(&out);
    assert_eq!(r["result"]["verdict"], "continuous");
    assert!(!r["result"]["witness"].as_array().unwrap().is_empty());
}

#[test]
fn oracle_check_on_nilpotents() {
    let out = run(&["check", "--fixture", "nilpotent2", "--alpha", "1,2,3", "--powers", "10"]);
    assert_eq!(out.status.code(), Some(0));
    let r = report(&out);
    let checks = r["result"]["checks"].as_array().unwrap();
    assert_eq!(checks.len(), 4);
    assert!(checks.iter().all(|c| c["passed"] == true));
}

#[test]
fn every_subcommand_runs() {
    let cases: &[&[&str]] = &[
        &["resolvent-sup", "--fixture", "harmonic_diag", "--tau", "5,0"],
        &["minimal-support", "--fixture", "nilpotent2", "--alpha", "1,2,3,4,5"],
        &["compact", "--fixture", "scalar_ones"],
        &["schatten", "--fixture", "harmonic_diag", "--p", "2", "--exclude", "1,2"],
        &["powerbound", "--fixture", "nilpotent2", "--alpha", "n", "--truncate", "30"],
        &["polybound", "--fixture", "volterra", "--alpha", "n", "--nq", "8", "--truncate", "6"],
        &["fixtures"],
        &["fixtures", "--fixture", "volterra", "--param", "alpha=[1]", "--param", "nq=4"],
    ];
    for args in cases {
        let out = run(args);
        assert_eq!(out.status.code(), Some(0), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
        report(&out);
    }
}

#[test]
fn unknown_verdict_is_not_a_failure() {
    // a tail without envelopes: compactness cannot be decided
    let desc = r#"{"kind":"generator","name":"harmonic_diag","tail":{"N0":1}}"#;
    let out = run_stdin(&["compact", "--family", "-"], desc);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(report(&out)["result"]["verdict"], "unknown");
}

#[test]
fn usage_and_parse_errors_exit_two() {
    assert_eq!(run(&["nonsense"]).status.code(), Some(2));
    assert_eq!(run(&["spectrum", "--bogus-flag"]).status.code(), Some(2));
    assert_eq!(run(&["spectrum"]).status.code(), Some(2));
    assert_eq!(run(&["spectrum", "--fixture", "no_such"]).status.code(), Some(2));
    assert_eq!(run(&["classify", "--fixture", "scalar_ones", "--tau", "x,1"]).status.code(), Some(2));
    assert_eq!(run(&["schatten", "--fixture", "harmonic_diag", "--p", "0.5"]).status.code(), Some(2));
    assert_eq!(run(&["compact", "--fixture", "nilpotent2", "--alpha", "1/n", "--nq", "2"]).status.code(), Some(2));

    let out = run_stdin(&["spectrum", "--family", "-"], "{\n\"kind\": \"explicit\",\n\"blocks\": [[[[1,0]]],\n");
    assert_eq!(out.status.code(), Some(2));
    let r = report(&out);
    let msg = r["result"]["error"]["message"].as_str().unwrap();
    assert!(msg.contains("line"), "{msg}");
}

#[test]
fn dimension_cap_is_an_internal_failure() {
    let out = Command::new(env!("CARGO_BIN_EXE_blockspec"))
        .args(["check", "--fixture", "nilpotent2", "--alpha", "1,2,3"])
        .env("BLOCKSPEC_DIM_CAP", "4")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(report(&out)["result"]["error"]["kind"], "internal");
}

#[test]
fn reports_are_deterministic_and_round_trip() {
    let args = ["polybound", "--fixture", "nilpotent2", "--alpha", "0.5,2", "--seed", "7"];
    let a = run(&args);
    let b = run(&args);
    assert_eq!(a.stdout, b.stdout);
    let v = report(&a);
    let again: Value = serde_json::from_str(&serde_json::to_string(&v).unwrap()).unwrap();
    assert_eq!(v, again);

    let exported = run(&["fixtures", "--fixture", "diag_accumulating", "--truncate", "4"]);
    let family = serde_json::to_string(&report(&exported)["result"]).unwrap();
    let out = run_stdin(&["spectrum", "--family", "-"], &family);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(report(&out)["result"]["eigenvalues"].as_array().unwrap().len(), 4);
}

#[test]
fn pretty_mode_prints_a_table() {
    let out = run(&["compact", "--fixture", "harmonic_diag", "--pretty"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.lines().any(|l| l.starts_with("result.verdict") && l.ends_with("compact")));
}
