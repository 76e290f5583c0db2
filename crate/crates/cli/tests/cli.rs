use std::path::PathBuf;
use std::process::Command;

use bifc_cli::{load_corpus, run, CorpusItem};

fn corpus(rel: &str) -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../corpus").join(rel).display().to_string()
}

fn bifc(args: &[&str]) -> bifc_cli::Outcome {
    let argv: Vec<String> = std::iter::once("bifc").chain(args.iter().copied()).map(String::from).collect();
    run(&argv)
}

fn model() -> String {
    corpus("InterfaceContext_scaled.fmod")
}

#[test]
fn consistent_machine_exits_zero() {
    let out = bifc(&["check", &corpus("JCounter.mch"), "--model", &model()]);
    assert_eq!(out.code, 0, "{}", out.stderr);
    assert!(out.stdout.contains("JCounter.decrement.consistency"));
    assert!(out.stdout.trim_end().ends_with("4 POs: 4 discharged, 0 refuted"), "{}", out.stdout);
}

#[test]
fn refinement_of_corpus_discharges() {
    let out = bifc(&["refine", &corpus("JCounter.mch"), &corpus("JCounter_ref.ref"), "--model", &model()]);
    assert_eq!(out.code, 0, "{}{}", out.stdout, out.stderr);
    assert_eq!(out.report.unwrap().summary.discharged, 7);
}

#[test]
fn renamed_operation_is_structural() {
    let out = bifc(&["refine", &corpus("JCounter.mch"), &corpus("mutants/Renamed.ref"), "--model", &model()]);
    assert_eq!(out.code, 2);
    assert!(out.stderr.contains("signature mismatch") && out.stderr.contains("increment"), "{}", out.stderr);
}

#[test]
fn weakened_retrenchment_is_refuted_with_witness() {
    let out = bifc(&[
        "retrench",
        &corpus("JCounter.mch"),
        &corpus("mutants/JCounter_ret_noWithin.rtr"),
        "--model",
        &model(),
        "--format",
        "json",
    ]);
    assert_eq!(out.code, 1, "{}", out.stderr);
    let json: serde_json::Value = serde_json::from_str(&out.stdout).unwrap();
    let inc = json["results"].as_array().unwrap().iter().find(|r| r["name"] == "JCounter_ret.increment.joint").unwrap();
    assert_eq!(inc["status"], "refuted");
    // pairs are two-element arrays
    assert_eq!(inc["witness"]["cvalue"], serde_json::json!([0, 0]));
    assert!(inc["witness"]["vv"].is_i64());
    assert_eq!(json["summary"]["refuted"], 1);
}

#[test]
fn json_is_deterministic() {
    let args = ["retrench", &corpus("JCounter.mch"), &corpus("JCounter_ret.rtr"), "--model", &model(), "--format", "json"];
    let (a, b) = (bifc(&args), bifc(&args));
    assert_eq!(a.code, 0);
    assert_eq!(a.stdout, b.stdout);
    assert!(!a.stdout.contains("elapsed_ms"));
}

#[test]
fn expired_deadline_exits_three() {
    let out = bifc(&["refine", &corpus("JCounter.mch"), &corpus("JCounter_ref.ref"), "--model", &model(), "--timeout", "0"]);
    assert_eq!(out.code, 3, "{}", out.stdout);
    assert!(out.stdout.contains("timeout"));
}

#[test]
fn usage_and_parse_errors_exit_two() {
    assert_eq!(bifc(&["check"]).code, 2);
    assert_eq!(bifc(&["frobnicate"]).code, 2);
    assert_eq!(bifc(&["--help"]).code, 0);
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("Bad.mch");
    std::fs::write(&bad, "MACHINE Bad VARIABLES v INVARIANT v : END").unwrap();
    let out = bifc(&["check", bad.to_str().unwrap(), "--model", &model()]);
    assert_eq!(out.code, 2);
    assert!(out.stderr.contains("Bad.mch"), "{}", out.stderr);
    let missing = dir.path().join("nope.mch");
    assert_eq!(bifc(&["check", missing.to_str().unwrap(), "--model", &model()]).code, 2);
}

#[test]
fn pattern_instantiate_writes_the_adapter() {
    let dir = tempfile::tempdir().unwrap();
    let outfile = dir.path().join("JCounter_ref.ref");
    let out = bifc(&[
        "pattern",
        "instantiate",
        "--abstract",
        &corpus("JCounter.mch"),
        "--concrete",
        &corpus("JCCounter.mch"),
        "--conv",
        "jint_of_jcint,jcint_of_jint",
        "--context",
        "InterfaceContext",
        "-o",
        outfile.to_str().unwrap(),
    ]);
    assert_eq!(out.code, 0, "{}", out.stderr);
    let written = bifc_core::parser::parse_machine(&std::fs::read_to_string(&outfile).unwrap()).unwrap();
    let expected = bifc_core::parser::parse_machine(&std::fs::read_to_string(corpus("JCounter_ref.ref")).unwrap()).unwrap();
    assert!(bifc_core::names::alpha_eq_machine(&written, &expected));

    // the written adapter refines, with JCCounter found next to the abstract machine
    let out = bifc(&["refine", &corpus("JCounter.mch"), outfile.to_str().unwrap(), "--model", &model()]);
    assert_eq!(out.code, 0, "{}{}", out.stdout, out.stderr);
}

#[test]
fn pattern_check_rejects_unknown_operation() {
    let out = bifc(&[
        "pattern",
        "check",
        "--abstract",
        &corpus("JCounter.mch"),
        "--concrete",
        &corpus("JCCounter.mch"),
        "--conv",
        "jint_of_jcint,jcint_of_jint",
        "--map",
        "increment=jc_nothing",
        "--model",
        &model(),
    ]);
    assert_eq!(out.code, 2);
    assert!(out.stderr.contains("jc_nothing"), "{}", out.stderr);
}

#[test]
fn small_soundness_run() {
    let out = bifc(&["soundness", "--instances", "5", "--seed", "1", "--max-size", "3", "--format", "json"]);
    assert_eq!(out.code, 0, "{}", out.stdout);
    let json: serde_json::Value = serde_json::from_str(&out.stdout).unwrap();
    assert_eq!(json["results"].as_array().unwrap().len(), 5);
    assert_eq!(bifc(&["soundness", "--max-size", "0"]).code, 2);
}

#[test]
fn corpus_loading() {
    let dir = tempfile::tempdir().unwrap();
    assert!(load_corpus(dir.path()).unwrap().is_empty());

    std::fs::create_dir(dir.path().join("sub")).unwrap();
    std::fs::write(dir.path().join("sub/B.mch"), "MACHINE B END").unwrap();
    std::fs::write(dir.path().join("A.mch"), "MACHINE A END").unwrap();
    std::fs::write(dir.path().join("m.fmod"), "SETS S = 0..1").unwrap();
    std::fs::write(dir.path().join("notes.txt"), "not a component").unwrap();
    let items = load_corpus(dir.path()).unwrap();
    let names: Vec<_> = items.iter().map(|(p, _)| p.strip_prefix(dir.path()).unwrap().display().to_string()).collect();
    assert_eq!(names, ["A.mch", "m.fmod", "sub/B.mch"]);
    assert!(matches!(&items[1].1, CorpusItem::Model(_)));
    assert!(matches!(&items[2].1, CorpusItem::Component(m) if m.name == "B"));

    std::fs::write(dir.path().join("C.ref"), "REFINEMENT").unwrap();
    assert!(load_corpus(dir.path()).is_err());

    let corpus_items = load_corpus(std::path::Path::new(&corpus(""))).unwrap();
    assert_eq!(corpus_items.len(), 9);
}

#[test]
fn binary_exit_codes_and_jobs() {
    let exe = env!("CARGO_BIN_EXE_bifc");
    let status = Command::new(exe)
        .args(["check", &corpus("JCounter.mch"), "--model", &model()])
        .env("BIFC_JOBS", "1")
        .output()
        .unwrap();
    assert_eq!(status.status.code(), Some(0));
    let status = Command::new(exe)
        .args(["retrench", &corpus("JCounter.mch"), &corpus("mutants/JCounter_ret_badRetrieves.rtr"), "--model", &model()])
        .output()
        .unwrap();
    assert_eq!(status.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&status.stdout).contains("refuted"));
}
