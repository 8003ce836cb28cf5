use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn pra(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pra")).args(args).output().unwrap()
}

fn data(name: &str) -> String {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data").join(name).display().to_string()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

fn report(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path.display().to_string()
}

const OVERFULL: &str = r#"{
  "ward": {"rooms": [{"id": "r1", "capacity": 2}, {"id": "r2", "capacity": 2}, {"id": "r3", "capacity": 2}]},
  "horizon": 2,
  "patients": [
    {"id": "f1", "sex": "F", "registration": 1, "arrival": 1, "discharge": 3},
    {"id": "f2", "sex": "F", "registration": 1, "arrival": 1, "discharge": 3},
    {"id": "f3", "sex": "F", "registration": 1, "arrival": 1, "discharge": 3},
    {"id": "m1", "sex": "M", "registration": 1, "arrival": 1, "discharge": 3},
    {"id": "m2", "sex": "M", "registration": 1, "arrival": 1, "discharge": 3},
    {"id": "m3", "sex": "M", "registration": 1, "arrival": 1, "discharge": 3}
  ]
}"#;

const EMPTY: &str = r#"{"ward": {"rooms": [{"id": "r1", "capacity": 1}]}, "horizon": 3, "patients": []}"#;

#[test]
fn solving_the_two_room_example() {
    let dir = tempfile::tempdir().unwrap();
    let out_path = dir.path().join("a.json");
    let out = pra(&["solve", "--instance", &data("two_rooms.json"), "--out", out_path.to_str().unwrap()]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let r = report(&out);
    assert_eq!(r["solve"]["f_trans"], 1);
    assert_eq!(r["solve"]["f_priv"], 1);
    assert_eq!(r["s_max_total"], 1);
    let written: Value = serde_json::from_str(&std::fs::read_to_string(&out_path).unwrap()).unwrap();
    assert!(!written.as_array().unwrap().is_empty() || written.is_object());
}

#[test]
fn written_assignment_validates_against_the_instance() {
    use pra_core::evaluate::{count_private_single_days, count_transfers, validate_assignment, Assignment};
    use pra_core::instance::load_instance;
    let dir = tempfile::tempdir().unwrap();
    let out_path = dir.path().join("a.json");
    let out = pra(&["solve", "--instance", &data("two_rooms.json"), "--variant", "I", "--cuts", "--out", out_path.to_str().unwrap()]);
    assert_eq!(code(&out), 0);
    let inst = load_instance(&std::fs::read_to_string(data("two_rooms.json")).unwrap()).unwrap();
    let a = Assignment::from_json(&std::fs::read_to_string(&out_path).unwrap()).unwrap();
    assert!(validate_assignment(&inst, &a).is_valid());
    // private first: she stays alone on day 2 without any move being forced
    assert_eq!(count_private_single_days(&inst, &a).unwrap(), 1);
    assert_eq!(count_transfers(&inst, &a).unwrap(), report(&out)["solve"]["f_trans"].as_u64().unwrap());
}

#[test]
fn strict_variant_is_infeasible_on_the_example() {
    let out = pra(&["solve", "--instance", &data("two_rooms.json"), "--variant", "P"]);
    assert_eq!(code(&out), 3);
    assert_eq!(report(&out)["solve"]["status"], "Infeasible");
}

#[test]
fn unknown_variant_is_an_input_error() {
    let out = pra(&["solve", "--instance", &data("two_rooms.json"), "--variant", "Z"]);
    assert_eq!(code(&out), 2);
}

#[test]
fn check_flags_an_overfull_ward() {
    let dir = tempfile::tempdir().unwrap();
    let inst = write(dir.path(), "overfull.json", OVERFULL);
    let csv = dir.path().join("check.csv");
    let out = pra(&["check", "--instance", &inst, "--out", csv.to_str().unwrap()]);
    assert_eq!(code(&out), 1);
    let text = std::fs::read_to_string(csv).unwrap();
    assert_eq!(text.lines().count(), 3);
    assert!(text.lines().nth(1).unwrap().contains("false"));
    // the model itself is infeasible for variants that need no bound
    assert_eq!(code(&pra(&["solve", "--instance", &inst])), 3);
}

#[test]
fn malformed_and_missing_inputs_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write(dir.path(), "bad.json", "{\"ward\": ");
    assert_eq!(code(&pra(&["check", "--instance", &bad])), 2);
    let unknown_room = write(
        dir.path(),
        "pre.json",
        r#"{"ward": {"rooms": [{"id": "r1", "capacity": 2}]}, "horizon": 1,
            "patients": [{"id": "a", "sex": "F", "registration": 0, "arrival": 0, "discharge": 2}],
            "pre_assignments": [{"patient": "a", "room": "r9"}]}"#,
    );
    assert_eq!(code(&pra(&["check", "--instance", &unknown_room])), 2);
    let missing = dir.path().join("nope.json");
    assert_eq!(code(&pra(&["smax", "--instance", missing.to_str().unwrap()])), 2);
}

#[test]
fn dynamic_writes_one_row_per_period() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("run.csv");
    let svg = dir.path().join("run.svg");
    let realized = dir.path().join("run.json");
    let out = pra(&[
        "dynamic",
        "--instance",
        &data("two_rooms.json"),
        "--out",
        csv.to_str().unwrap(),
        "--chart",
        svg.to_str().unwrap(),
        "--assignment",
        realized.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(&csv).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "t,stage,wall_time_s,transfers,singles,s_max_t");
    assert_eq!(lines.count(), 3);
    assert!(std::fs::read_to_string(&svg).unwrap().starts_with("<svg"));
    assert!(realized.exists());
    assert_eq!(report(&out)["dynamic"]["valid"], true);
}

#[test]
fn dynamic_reports_termination() {
    let dir = tempfile::tempdir().unwrap();
    let inst = write(dir.path(), "overfull.json", OVERFULL);
    let out = pra(&["dynamic", "--instance", &inst]);
    assert_eq!(code(&out), 5);
    assert_eq!(report(&out)["dynamic"]["terminated_at"], 1);
}

#[test]
fn empty_instance_runs_cleanly() {
    let dir = tempfile::tempdir().unwrap();
    let inst = write(dir.path(), "empty.json", EMPTY);
    for cmd in ["check", "smax", "solve"] {
        assert_eq!(code(&pra(&[cmd, "--instance", &inst])), 0, "{cmd}");
    }
    let csv = dir.path().join("run.csv");
    let out = pra(&["dynamic", "--instance", &inst, "--out", csv.to_str().unwrap()]);
    assert_eq!(code(&out), 0);
    assert_eq!(std::fs::read_to_string(csv).unwrap().lines().count(), 4);
}

#[test]
fn generation_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.json");
    let b = dir.path().join("b.json");
    for p in [&a, &b] {
        let out = pra(&["generate", "--seed", "7", "--rooms", "6", "--days", "20", "--out", p.to_str().unwrap()]);
        assert_eq!(code(&out), 0);
    }
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    let other = pra(&["generate", "--seed", "8", "--rooms", "6", "--days", "20"]);
    assert_ne!(other.stdout, std::fs::read(&a).unwrap());
    let check = pra(&["check", "--instance", a.to_str().unwrap()]);
    assert!(matches!(code(&check), 0 | 1));
}

#[test]
fn several_instances_fill_an_output_directory() {
    let dir = tempfile::tempdir().unwrap();
    let empty = write(dir.path(), "empty.json", EMPTY);
    let outdir: PathBuf = dir.path().join("out");
    let out = pra(&[
        "smax",
        "--instance",
        &data("two_rooms.json"),
        &empty,
        "--jobs",
        "2",
        "--out",
        outdir.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0);
    assert_eq!(report(&out).as_array().unwrap().len(), 2);
    assert!(outdir.join("two_rooms.csv").exists());
    assert!(outdir.join("empty.csv").exists());
}

#[test]
fn external_backend_through_the_adapter_shim() {
    let cmd = format!("'{}' adapter {{model_path}} {{solution_path}} {{time_limit}}", env!("CARGO_BIN_EXE_pra"));
    let out = pra(&["solve", "--instance", &data("two_rooms.json"), "--backend-cmd", &cmd, "--time-limit", "30"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(report(&out)["solve"]["objective_values"], serde_json::json!([1, 1]));
    let broken = pra(&["solve", "--instance", &data("two_rooms.json"), "--backend-cmd", "exit 3"]);
    assert_eq!(code(&broken), 2);
}
