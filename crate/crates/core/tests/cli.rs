use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use netsynth::fixtures::load_fixture;
use netsynth::model::io::system_from_json;
use netsynth::synthesis::SynthesisResult;

fn netsynth(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_netsynth")).args(args).output().expect("binary runs")
}

fn paper_json() -> String {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/paper.json").display().to_string()
}

fn scratch(name: &str) -> PathBuf {
    let d = std::env::temp_dir().join(format!("netsynth-cli-{}-{name}", std::process::id()));
    let _ = fs::remove_dir_all(&d);
    fs::create_dir_all(&d).unwrap();
    d
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

#[test]
fn bundled_file_matches_fixture() {
    let text = fs::read_to_string(paper_json()).unwrap();
    assert_eq!(system_from_json(&text).unwrap(), load_fixture("paper-sec7").unwrap());
    let o = netsynth(&["fixture", "paper-sec7"]);
    assert_eq!(stdout(&o), text);
}

#[test]
fn synth_structured_report_round_trips() {
    let dir = scratch("synth");
    let report = dir.join("report.json");
    let o = netsynth(&["synth", "ring-base", "--format", "structured", "--out", report.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let text = fs::read_to_string(&report).unwrap();
    let r: SynthesisResult = serde_json::from_str(&text).unwrap();
    assert!(r.gamma_verified <= r.gamma_certified * (1.0 + 1e-6));
    assert!(r.certificate.passed);
    assert_eq!(r.per_eigenvalue.len(), 3);
    let again: SynthesisResult = serde_json::from_str(&serde_json::to_string(&r).unwrap()).unwrap();
    assert_eq!(again, r);

    // the report doubles as a gains file
    let g = format!("{}", r.gamma_certified);
    let o = netsynth(&["analyze", "ring-base", "--gains", report.to_str().unwrap(), "--gamma", &g]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    let g = format!("{}", 0.5 * r.gamma_verified);
    let o = netsynth(&["analyze", "ring-base", "--gains", report.to_str().unwrap(), "--gamma", &g]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn blockdiag_is_no_better_than_kron() {
    let gamma = |mode: &str| -> f64 {
        let o = netsynth(&["synth", "ring-base", "--mode", mode, "--format", "csv"]);
        assert_eq!(o.status.code(), Some(0));
        let text = stdout(&o);
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("n,mode,gamma_certified,gamma_verified,seconds"));
        let row: Vec<&str> = lines.next().unwrap().split(',').collect();
        assert_eq!(row[1], mode);
        row[2].parse().unwrap()
    };
    assert!(gamma("blockdiag") >= gamma("kron") * (1.0 - 1e-6));
}

#[test]
fn exit_codes() {
    // no verified controller exists for the bundled example under this model
    let o = netsynth(&["synth", &paper_json(), "--gamma-hi", "1000"]);
    assert_eq!(o.status.code(), Some(2));

    let dir = scratch("bad");
    let bad = dir.join("bad.json");
    fs::write(&bad, r#"{"pattern": [[0,1],[1,0]], "dims": {"n": 1, "n_u": 1, "n_w": 1, "n_z": 1}, "A": {"d": [[1, 2]]}}"#).unwrap();
    let o = netsynth(&["synth", bad.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(!o.stderr.is_empty());

    fs::write(&bad, r#"{"pattern": [[1,1],[1,0]], "dims": {"n": 1, "n_u": 1, "n_w": 1, "n_z": 1}}"#).unwrap();
    let o = netsynth(&["synth", bad.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("invalid system"));

    assert_eq!(netsynth(&["synth", "ring-base", "--tol", "3"]).status.code(), Some(1));
    assert_eq!(netsynth(&["synth", "ring-base", "--mode", "diagonal"]).status.code(), Some(1));
}

#[test]
fn export_is_deterministic() {
    let dir = scratch("export");
    let (a, b) = (dir.join("a"), dir.join("b"));
    for d in [&a, &b] {
        let o = netsynth(&["export", &paper_json(), "--gamma", "10", "--out", d.to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(0));
        assert_eq!(stdout(&o).lines().count(), 3);
    }
    let mut names: Vec<_> = fs::read_dir(&a).unwrap().map(|e| e.unwrap().file_name()).collect();
    names.sort();
    assert_eq!(names.len(), 3);
    for n in names {
        assert_eq!(fs::read(a.join(&n)).unwrap(), fs::read(b.join(&n)).unwrap());
    }
    let o = netsynth(&["export", &paper_json(), "--gamma", "10", "--mode", "full", "--out", dir.join("f").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o).lines().count(), 1);
    assert_eq!(netsynth(&["export", &paper_json(), "--gamma", "0"]).status.code(), Some(1));
}

#[test]
fn bench_flags_guarded_rows() {
    let o = netsynth(&["bench", "--sizes", "4,13", "--mode", "full"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 3);
    assert!(lines[1].starts_with("4,full,0."));
    assert_eq!(lines[2], "13,full,skipped,skipped,skipped");
}
