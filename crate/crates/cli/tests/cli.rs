use std::path::Path;
use std::process::{Command, Output};

fn franson(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_franson"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn read(dir: &Path, name: &str) -> Vec<u8> {
    std::fs::read(dir.join(name)).unwrap_or_else(|e| panic!("{}: {e}", dir.join(name).display()))
}

#[test]
fn predict_reports_the_chained_values() {
    let o = franson(&["predict", "--n", "3"]);
    assert_eq!(code(&o), 0);
    let s = stdout(&o);
    assert!(s.contains("5.1962 vs bound 5: violation"), "{s}");

    let o = franson(&["predict", "--n", "2"]);
    let s = stdout(&o);
    assert!(s.contains("2.8284 vs bound 3: no violation"), "{s}");
}

#[test]
fn predict_prints_the_joint_table() {
    let o = franson(&["predict", "--chi", "0"]);
    assert_eq!(code(&o), 0);
    let s = stdout(&o);
    let row = s
        .lines()
        .find(|l| l.trim_start().starts_with("+E") && l.contains('.'))
        .unwrap();
    let cells: Vec<f64> = row.split_whitespace().skip(1).map(|x| x.parse().unwrap()).collect();
    assert_eq!(cells[1], 0.0);
    assert_eq!(cells[0], 0.125);
    assert_eq!(cells[2], 0.0625);
}

#[test]
fn usage_errors_exit_with_two() {
    assert_eq!(code(&franson(&["frobnicate"])), 2);
    assert_eq!(code(&franson(&["predict", "--n", "x"])), 2);
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("s");
    assert_eq!(
        code(&franson(&["simulate", "--set", "bogus=1", "--out", path(&out)])),
        2
    );
    assert_eq!(
        code(&franson(&["simulate", "--set", "D_over_dL=2", "--out", path(&out)])),
        2
    );
}

#[test]
fn validate_flags_the_quadrant_model() {
    let o = franson(&["validate", "--model", "quadrant"]);
    assert_eq!(code(&o), 1);
    assert!(stdout(&o).contains("FAIL"));
    assert_eq!(code(&franson(&["validate"])), 0);
}

#[test]
fn validate_is_repeatable() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    let first = franson(&["validate", "--model", "seed", "--out", path(&a)]);
    let second = franson(&["validate", "--model", "seed", "--out", path(&b)]);
    assert_eq!(first.stdout, second.stdout);
    assert_eq!(read(&a, "validation.txt"), read(&b, "validation.txt"));
}

#[test]
fn synth_meets_the_gate_and_writes_a_model() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("synth");
    let o = franson(&["synth", "--seed", "seeds/default", "--tol", "5e-3", "--out", path(&out)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let report = String::from_utf8(read(&out, "report.json")).unwrap();
    assert!(report.contains("\"status\": \"ok\""));
    let v = franson(&["validate", "--model", path(&out.join("model.model"))]);
    assert_eq!(code(&v), 0);

    let missing = franson(&[
        "synth",
        "--seed",
        path(&dir.path().join("nope.model")),
        "--out",
        path(&out),
    ]);
    assert_eq!(code(&missing), 2);
}

#[test]
fn simulate_analyze_and_replay_are_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let sim = dir.path().join("sim");
    let o = franson(&[
        "simulate",
        "--pairs",
        "4e4",
        "--seed",
        "5",
        "--engine",
        "lhv",
        "--switching",
        "fast",
        "--n",
        "3",
        "--reference",
        "--whitebox",
        "--out",
        path(&sim),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    for f in [
        "detections.csv",
        "settings.csv",
        "truth.csv",
        "config.txt",
        "manifest.txt",
    ] {
        assert!(sim.join(f).exists(), "{f}");
    }

    let ana = dir.path().join("ana");
    let o = franson(&["analyze", "--input", path(&sim), "--early-filter", "--out", path(&ana)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let report = String::from_utf8(read(&ana, "report.txt")).unwrap();
    assert!(report.contains("n = 3"));
    assert!(report.contains("whitebox_chained_ll"));
    let pairs = String::from_utf8(read(&ana, "pairs.csv")).unwrap();
    assert!(pairs.starts_with("t_left,t_right,sign_l,sign_r,class,early_phi,early_psi,late_phi,late_psi"));

    let sim2 = dir.path().join("sim2");
    let o = franson(&[
        "--threads",
        "3",
        "replay",
        path(&sim.join("manifest.txt")),
        "--out",
        path(&sim2),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    for f in ["detections.csv", "settings.csv", "truth.csv", "config.txt"] {
        assert_eq!(read(&sim, f), read(&sim2, f), "{f}");
    }

    let ana2 = dir.path().join("ana2");
    let o = franson(&["replay", path(&ana.join("manifest.txt")), "--out", path(&ana2)]);
    assert_eq!(code(&o), 0);
    for f in ["pairs.csv", "report.txt", "report_table.txt"] {
        assert_eq!(read(&ana, f), read(&ana2, f), "{f}");
    }
}

#[test]
fn thread_count_does_not_change_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let run = |threads: &str, name: &str| {
        let out = dir.path().join(name);
        let o = franson(&[
            "--threads",
            threads,
            "simulate",
            "--pairs",
            "60000",
            "--switching",
            "fast",
            "--whitebox",
            "--out",
            path(&out),
        ]);
        assert_eq!(code(&o), 0);
        out
    };
    let (a, b) = (run("1", "a"), run("4", "b"));
    for f in ["detections.csv", "settings.csv", "truth.csv"] {
        assert_eq!(read(&a, f), read(&b, f), "{f}");
    }
}

#[test]
fn demos_pass_on_small_runs() {
    let dir = tempfile::tempdir().unwrap();
    let o = franson(&[
        "demo",
        "loophole",
        "--pairs",
        "2e5",
        "--seed",
        "7",
        "--out",
        path(dir.path()),
    ]);
    assert_eq!(code(&o), 0, "{}", stdout(&o));
    assert!(stdout(&o).contains("with LHV engine"));
    assert!(dir.path().join("loophole.txt").exists());

    let o = franson(&["demo", "nogo", "--pairs", "2e6", "--seed", "7"]);
    assert_eq!(code(&o), 0, "{}", stdout(&o));
    let s = stdout(&o);
    assert!(s.contains("QM : chained") && s.contains("violation"), "{s}");
}

#[test]
fn underpowered_demo_fails_its_assertion() {
    // too few pairs for a three-sigma excess
    let o = franson(&["demo", "nogo", "--pairs", "2e4", "--seed", "7"]);
    assert_eq!(code(&o), 1, "{}", stdout(&o));
}
