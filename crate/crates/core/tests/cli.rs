use std::path::{Path, PathBuf};

use tm_core::cli::run;

fn fixture(name: &str) -> String {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name).display().to_string()
}

fn tm(args: &[&str]) -> (i32, String, String) {
    let (mut out, mut err) = (Vec::new(), Vec::new());
    let mut argv = vec!["tm"];
    argv.extend_from_slice(args);
    let code = run(argv, &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

/// Compares with a checked-in file; `BLESS=1` rewrites it instead.
fn golden(name: &str, actual: &str) {
    let path = PathBuf::from(fixture(name));
    if std::env::var_os("BLESS").is_some() {
        std::fs::write(&path, actual).unwrap();
        return;
    }
    let want = std::fs::read_to_string(&path).unwrap();
    assert_eq!(actual, want, "{name} differs; rerun with BLESS=1 if intended");
}

#[test]
fn validate_exit_codes() {
    let (code, out, _) = tm(&["validate", &fixture("vending.tm")]);
    assert_eq!((code, out.as_str()), (0, ""));

    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.tm");
    std::fs::write(&bad, "machine M { stages: receive, process }\nflow M.process -> M.receive\n").unwrap();
    let (code, out, _) = tm(&["validate", bad.to_str().unwrap()]);
    assert_eq!(code, 1);
    let lines: Vec<&str> = out.lines().collect();
    assert_eq!(lines.len(), 1);
    assert!(lines[0].contains("ILLEGAL_INTRA_ARC"), "{out}");

    let (code, out, err) = tm(&["validate", "no/such/file.tm"]);
    assert_eq!(code, 2);
    assert!(out.is_empty() && !err.is_empty());
}

#[test]
fn parse_errors_are_usage_errors() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.tm");
    std::fs::write(&bad, "machine {").unwrap();
    let (code, out, err) = tm(&["validate", bad.to_str().unwrap()]);
    assert_eq!(code, 2);
    assert!(out.is_empty());
    assert!(err.contains(":1:"), "{err}");
}

#[test]
fn unknown_verb() {
    let (code, _, err) = tm(&["frobnicate"]);
    assert_eq!(code, 2);
    assert!(err.contains("Usage"));
}

#[test]
fn simulate_pass_path() {
    let (code, out, _) = tm(&["simulate", &fixture("vending.tm"), &fixture("dollar.json"), "--script", "verify=pass"]);
    assert_eq!(code, 0);
    let t = tm_core::sim::Trace::from_json(&out).unwrap();
    assert_eq!(t.events(), ["E_A", "E_B", "E_D", "E_E", "E_G"]);
}

#[test]
fn simulate_is_byte_stable() {
    let args = ["simulate", &fixture("vending.tm"), &fixture("dollar.json"), "--seed", "7", "--policy", "random"];
    let first = tm(&args).1;
    for _ in 0..3 {
        assert_eq!(tm(&args).1, first);
    }
}

#[test]
fn simulate_overflow() {
    let (code, out, err) = tm(&["simulate", &fixture("loop.tm"), &fixture("loop.json")]);
    assert_eq!(code, 1);
    assert!(out.is_empty());
    assert!(err.contains("CASCADE_OVERFLOW"));
}

#[test]
fn config_file_and_flags() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    std::fs::write(&cfg, "# fail the check\nscript = verify=fail\nseed = 3\n").unwrap();
    let c = cfg.to_str().unwrap();
    let (code, out, _) = tm(&["simulate", &fixture("vending.tm"), &fixture("dollar.json"), "--config", c]);
    assert_eq!(code, 0);
    let t = tm_core::sim::Trace::from_json(&out).unwrap();
    assert_eq!(t.events(), ["E_A", "E_B", "E_C"]);
    assert_eq!(t.seed, 3);
    // flags win over the file
    let (_, out, _) =
        tm(&["simulate", &fixture("vending.tm"), &fixture("dollar.json"), "--config", c, "--script", "verify=pass"]);
    let t = tm_core::sim::Trace::from_json(&out).unwrap();
    assert_eq!(t.events()[2], "E_D");

    std::fs::write(&cfg, "colour = blue\n").unwrap();
    let (code, _, _) = tm(&["simulate", &fixture("vending.tm"), &fixture("dollar.json"), "--config", c]);
    assert_eq!(code, 2);
}

#[test]
fn check_round_trip() {
    let (_, out, _) = tm(&["simulate", &fixture("vending.tm"), &fixture("dollar.json")]);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("t.json");
    std::fs::write(&path, &out).unwrap();
    let (code, out, _) = tm(&["check", &fixture("vending.tm"), path.to_str().unwrap()]);
    assert_eq!(code, 0);
    assert!(out.contains("\"conforms\": true"));

    let mut t = tm_core::sim::Trace::from_json(&std::fs::read_to_string(&path).unwrap()).unwrap();
    t.occurrences.swap(1, 2);
    std::fs::write(&path, t.to_json()).unwrap();
    let (code, out, _) = tm(&["check", &fixture("vending.tm"), path.to_str().unwrap()]);
    assert_eq!(code, 1);
    assert!(out.contains("\"conforms\": false"));
}

#[test]
fn coverage_report() {
    let (code, out, _) = tm(&["coverage", &fixture("vending.tm")]);
    assert_eq!(code, 0);
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert_eq!(v["uncovered"].as_array().unwrap().len(), 0);
}

#[test]
fn table_verb() {
    let dir = tempfile::tempdir().unwrap();
    let emitted = dir.path().join("table.tm");
    let (code, out, _) =
        tm(&["table", &fixture("vending_table.csv"), "--max-len", "3", "--emit-tm", emitted.to_str().unwrap()]);
    assert_eq!(code, 0);
    assert_eq!(out, "{\n  \"equivalent\": true,\n  \"counterexample\": null\n}\n");
    let (code, _, _) = tm(&["validate", emitted.to_str().unwrap()]);
    assert_eq!(code, 0);
}

#[test]
fn export_dot_golden() {
    let (code, out, _) = tm(&["export", &fixture("vending.tm")]);
    assert_eq!(code, 0);
    golden("vending.dot", &out);
    let (_, colored, _) = tm(&["export", &fixture("vending.tm"), "--regions"]);
    golden("vending_regions.dot", &colored);
    assert_eq!(colored.matches("// region").count(), 9);
    assert_eq!(tm(&["export", &fixture("vending.tm"), "--regions"]).1, colored);
    // flows solid, triggers dashed
    let solid = out.lines().filter(|l| l.contains("->") && !l.contains("dashed")).count();
    let dashed = out.lines().filter(|l| l.contains("dashed")).count();
    assert_eq!((solid, dashed), (7, 11));
}

#[test]
fn export_empty_and_json() {
    let dir = tempfile::tempdir().unwrap();
    let empty = dir.path().join("empty.tm");
    std::fs::write(&empty, "# nothing here\n").unwrap();
    let (code, out, _) = tm(&["export", empty.to_str().unwrap()]);
    assert_eq!((code, out.as_str()), (0, "digraph tm {\n}\n"));
    let (code, out, _) = tm(&["export", &fixture("vending.tm"), "--format", "json"]);
    assert_eq!(code, 0);
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert_eq!(v["regions"].as_object().unwrap().len(), 9);
}

#[test]
fn export_invalid_model() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.tm");
    std::fs::write(&bad, "machine M { stages: receive, process }\nflow M.process -> M.receive\n").unwrap();
    assert_eq!(tm(&["export", bad.to_str().unwrap()]).0, 1);
}

#[test]
fn railcar_verbs() {
    let (code, out, _) = tm(&["railcar", "run", "--cars", "1", "--ticks", "200"]);
    assert_eq!(code, 0);
    let t = tm_core::sim::Trace::from_json(&out).unwrap();
    assert!(t.events().contains(&"E13"));

    let (code, out, err) = tm(&["railcar", "explore", "--cars", "2", "--depth", "60"]);
    assert_eq!(code, 0, "{err}");
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert_eq!(v["findings"].as_array().unwrap().len(), 0);

    assert_eq!(tm(&["railcar", "explore", "--depth", "0"]).0, 2);

    let (code, out, err) = tm(&["railcar", "explore", "--terminals", "1", "--cars", "2", "--mutation", "no-dwell"]);
    assert_eq!(code, 1);
    assert!(err.contains("DWELL_UNDERRUN"));
    assert!(out.contains("DWELL_UNDERRUN"));
    assert_eq!(tm(&["railcar", "run", "--mutation", "nonsense"]).0, 2);
    assert_eq!(tm(&["railcar", "run", "--terminals", "1", "--cars", "9"]).0, 2);
}

#[test]
fn railcar_fixture_matches_builder() {
    let doc = tm_core::railcar::build_terminal_model(Default::default()).unwrap();
    let mut text = String::from(HEADER);
    text.push_str(&tm_core::dsl::serialize(&doc));
    golden("railcar_terminal.tm", &text);
    let parsed = tm_core::dsl::parse_str(&std::fs::read_to_string(fixture("railcar_terminal.tm")).unwrap()).unwrap();
    assert_eq!(parsed, doc);
}

const HEADER: &str = "\
# One railcar terminal: the approach area B, the terminal T, the leaving
# area A, the next area C and the parking machine P with spots P1 and P2.
# Each flag `occupied` guards an area; `approaching` on B gives arriving
# cars priority over parked ones. Events E1..E15 partition the model.
#
# E12 is sometimes worded \"the railcar leaves B\"; the car is in A at that
# point, so the region covers leaving A.
";
