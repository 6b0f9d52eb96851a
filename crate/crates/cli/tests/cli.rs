use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_ricci2d");

const SMALL_CIGAR: &str = r#"
seed = 5
[scenario]
kind = "truncated_cigar"
length = 12.0
horizon = 0.5
cells_per_unit = 4
n_theta = 8
"#;

const CAPPED: &str = r#"
seed = 2
[scenario]
kind = "capped_sphere"
radius = 1.0
"#;

const CONSTRUCTION: &str = r#"
[scenario]
kind = "construction"
k_max = 2
t_checks = [0.0]
"#;

fn run(args: &[&str]) -> Output {
    Command::new(BIN).args(args).output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn write_config(dir: &Path, name: &str, body: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, body).unwrap();
    p
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn reports(dir: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(dir.join("reports.json")).unwrap()).unwrap()
}

#[test]
fn validate_lists_identities_and_passes() {
    let o = run(&["validate"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let rows = stdout(&o).lines().filter(|l| l.ends_with(" ok")).count();
    assert_eq!(rows, 12);
}

#[test]
fn sample_density_doubles_samples() {
    let o = run(&["validate", "--sample-density", "2"]);
    assert_eq!(code(&o), 0);
    assert!(stdout(&o).lines().skip(1).all(|l| l.split_whitespace().nth(1) == Some("2000")));
}

#[test]
fn injected_fault_names_the_identity() {
    let o = run(&["validate", "--inject-fault", "timed_distance"]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("timed_distance"), "{}", stderr(&o));
    let o = run(&["validate", "--inject-fault", "no_such_identity"]);
    assert_eq!(code(&o), 2);
}

#[test]
fn malformed_config_exits_with_input_error() {
    let tmp = tempfile::tempdir().unwrap();
    let bad = write_config(tmp.path(), "bad.toml", "[scenario]\nkind = \"truncated_cigar\"\nalpha = [\n");
    let o = run(&["simulate", "--config", s(&bad), "--out", s(&tmp.path().join("out"))]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("bad.toml"), "{}", stderr(&o));

    let unknown = write_config(tmp.path(), "unknown.toml", "[scenario]\nkind = \"torus\"\n");
    let o = run(&["simulate", "--config", s(&unknown), "--out", s(&tmp.path().join("out2"))]);
    assert_eq!(code(&o), 2);

    let missing = tmp.path().join("missing.toml");
    let o = run(&["simulate", "--config", s(&missing), "--out", s(&tmp.path().join("out3"))]);
    assert_eq!(code(&o), 2);
}

#[test]
fn cigar_run_writes_outputs_and_report_csvs() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "cigar.toml", SMALL_CIGAR);
    let out = tmp.path().join("run");
    let o = run(&["simulate", "--config", s(&cfg), "--out", s(&out)]);
    assert_eq!(code(&o), 0, "{}{}", stdout(&o), stderr(&o));
    assert!(out.join("run.csv").is_file());
    assert!(out.join("snapshots/snap_0000.txt").is_file());

    let doc = reports(&out);
    let m = &doc["measured_constants"];
    assert!(m["beta_star"].is_number(), "{m}");
    assert!(m["eps_hat"].as_array().is_some_and(|a| !a.is_empty()));
    assert_eq!(doc["seed"], 5);

    let o = run(&["report", "--run", s(&out)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    for row in ["chen", "bol", "barrier_sandwich", "curvature_persistence"] {
        assert!(stdout(&o).lines().any(|l| l.starts_with(row)), "missing {row}");
    }
    let chen = fs::read_to_string(out.join("plots/chen.csv")).unwrap();
    let mut lines = chen.lines();
    assert!(lines.next().unwrap().starts_with("t,min_K,bound"));
    for l in lines {
        let f: Vec<f64> = l.split(',').map(|x| x.parse().unwrap()).collect();
        assert!((f[2] + 1.0 / (2.0 * f[0])).abs() < 1e-12 * f[2].abs());
    }
}

#[test]
fn overrides_change_the_run() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "cigar.toml", SMALL_CIGAR);
    let out = tmp.path().join("run");
    let o =
        run(&["simulate", "--config", s(&cfg), "--out", s(&out), "--set", "scenario.horizon=0.25", "--set", "seed=9"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let doc = reports(&out);
    assert_eq!(doc["measured_constants"]["horizon"], 0.25);
    assert_eq!(doc["seed"], 9);

    let o = run(&["simulate", "--config", s(&cfg), "--out", s(&tmp.path().join("x")), "--set", "scenario.alpha"]);
    assert_eq!(code(&o), 2);
}

#[test]
fn refuses_non_empty_output_without_force() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "cigar.toml", SMALL_CIGAR);
    let out = tmp.path().join("run");
    fs::create_dir_all(&out).unwrap();
    fs::write(out.join("keep.txt"), "x").unwrap();
    let o = run(&["simulate", "--config", s(&cfg), "--out", s(&out)]);
    assert_eq!(code(&o), 2);
    assert!(!out.join("run.csv").exists());
    let o = run(&["simulate", "--config", s(&cfg), "--out", s(&out), "--force"]);
    assert_eq!(code(&o), 0);
    assert!(out.join("run.csv").is_file());
}

#[test]
fn repeated_runs_are_bit_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "cigar.toml", SMALL_CIGAR);
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    assert_eq!(code(&run(&["simulate", "--config", s(&cfg), "--out", s(&a)])), 0);
    assert_eq!(code(&run(&["simulate", "--config", s(&cfg), "--out", s(&b)])), 0);
    assert_eq!(fs::read(a.join("run.csv")).unwrap(), fs::read(b.join("run.csv")).unwrap());
}

#[test]
fn parallel_jobs_isolate_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let c1 = write_config(tmp.path(), "capped.toml", CAPPED);
    let c2 = write_config(tmp.path(), "cigar.toml", SMALL_CIGAR);
    let out = tmp.path().join("runs");
    let o = run(&["simulate", "--config", s(&c1), s(&c2), "--out", s(&out), "--jobs", "2"]);
    assert_eq!(code(&o), 0, "{}{}", stdout(&o), stderr(&o));
    let capped = reports(&out.join("capped"));
    let t = capped["measured_constants"]["extinction_time"].as_f64().unwrap();
    assert!((t - 1.0).abs() < 0.02, "extinction at {t}");
    assert_eq!(reports(&out.join("cigar"))["scenario"], "truncated_cigar");
}

#[test]
fn report_on_empty_directory_fails() {
    let tmp = tempfile::tempdir().unwrap();
    let o = run(&["report", "--run", s(tmp.path())]);
    assert_eq!(code(&o), 2);
}

#[test]
fn diagnose_reads_a_snapshot() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "cigar.toml", SMALL_CIGAR);
    let out = tmp.path().join("run");
    assert_eq!(code(&run(&["simulate", "--config", s(&cfg), "--out", s(&out)])), 0);
    let snap = out.join("snapshots/snap_0002.txt");
    let o = run(&["diagnose", "--snapshot", s(&snap), "--domains", "5"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(stdout(&o).contains("chen") && stdout(&o).contains("bol"));

    let junk = write_config(tmp.path(), "junk.txt", "not a snapshot\n");
    assert_eq!(code(&run(&["diagnose", "--snapshot", s(&junk)])), 2);
}

#[test]
fn construct_writes_the_patched_metric() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "c.toml", CONSTRUCTION);
    let out = tmp.path().join("k");
    let o = run(&["construct", "--config", s(&cfg), "--out", s(&out)]);
    assert_eq!(code(&o), 0, "{}{}", stdout(&o), stderr(&o));
    for f in ["metric/base.txt", "metric/patch_1.txt", "metric/patch_2.txt", "reports.json"] {
        assert!(out.join(f).is_file(), "{f}");
    }

    let cigar = write_config(tmp.path(), "cigar.toml", SMALL_CIGAR);
    assert_eq!(code(&run(&["construct", "--config", s(&cigar), "--out", s(&tmp.path().join("z"))])), 2);
}
