//! End-to-end tests of the `mot` binary: exit codes, file outputs and
//! determinism.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_mot"))
}

fn fixture(name: &str) -> String {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(name)
        .to_string_lossy()
        .into_owned()
}

fn tmp_dir(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("mot-cli-test-{tag}-{}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn profile_emits_extremizers_and_csv() {
    let out = tmp_dir("profile");
    let o = run(&[
        "profile",
        "--mu",
        "lognormal:sigma=0.2",
        "--nu",
        "lognormal:sigma=0.3",
        "--out",
        out.to_str().unwrap(),
        "--json",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let json: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("extremizers.json")).unwrap())
            .unwrap();
    let m = json["m"].as_f64().unwrap();
    assert!((m - 0.783887966).abs() < 1e-6);
    let product = json["product"].as_f64().unwrap();
    assert!((product - 1.0).abs() < 1e-6); // symmetric pair
    let csv = std::fs::read_to_string(out.join("deltaF.csv")).unwrap();
    assert!(csv.starts_with("x,deltaF,deltaG\n"));
    assert!(csv.lines().count() > 1000);
}

#[test]
fn profile_equal_marginals_exits_2() {
    let o = run(&["profile", "--mu", "lognormal:sigma=0.2", "--nu", "lognormal:sigma=0.2"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn bad_config_exits_4() {
    let o = run(&["profile", "--mu", "weibull:k=2", "--nu", "lognormal:sigma=0.3"]);
    assert_eq!(o.status.code(), Some(4));
    let o = run(&["build", "--plan", "diagonal", "--mu", "lognormal:sigma=0.2", "--nu", "lognormal:sigma=0.3"]);
    assert_eq!(o.status.code(), Some(4));
    let o = run(&["price", "--plan", "hk", "--mu", "lognormal:sigma=0.2", "--nu", "lognormal:sigma=0.3"]);
    assert_eq!(o.status.code(), Some(4)); // missing payoff
}

#[test]
fn build_outputs_monotone_columns() {
    let out = tmp_dir("build");
    let o = run(&[
        "build",
        "--config",
        &fixture("run.conf"),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(out.join("hk.csv")).unwrap();
    let mut p_prev = f64::INFINITY;
    let mut q_prev = f64::INFINITY;
    for line in text.lines().skip(1) {
        let cols: Vec<f64> = line.split(',').map(|t| t.parse().unwrap()).collect();
        assert!(cols[1] < p_prev && cols[2] < q_prev, "p,q must decrease");
        p_prev = cols[1];
        q_prev = cols[2];
    }
    // left plan: identity rows below the split point
    let o = run(&[
        "build",
        "--config",
        &fixture("run.conf"),
        "--plan",
        "left",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success());
    let text = std::fs::read_to_string(out.join("left.csv")).unwrap();
    let first = text.lines().nth(1).unwrap();
    let cols: Vec<f64> = first.split(',').map(|t| t.parse().unwrap()).collect();
    assert_eq!(cols[0], cols[1]);
    assert_eq!(cols[0], cols[2]);
}

#[test]
fn build_is_byte_deterministic() {
    let out1 = tmp_dir("det1");
    let out2 = tmp_dir("det2");
    for out in [&out1, &out2] {
        let o = run(&["build", "--config", &fixture("run.conf"), "--out", out.to_str().unwrap()]);
        assert!(o.status.success());
    }
    let a = std::fs::read(out1.join("hk.csv")).unwrap();
    let b = std::fs::read(out2.join("hk.csv")).unwrap();
    assert_eq!(a, b, "identical config must give byte-identical CSV");
}

#[test]
fn price_forward_is_zero_and_json_works() {
    let o = run(&[
        "price",
        "--config",
        &fixture("run.conf"),
        "--payoff",
        "forward",
        "--json",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let json: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert!(json["value"].as_f64().unwrap().abs() < 1e-9);
    assert_eq!(json["plan"], "hk");
}

#[test]
fn bounds_reproduces_exact_fixture() {
    let o = run(&[
        "bounds",
        "--mu",
        "atoms:0.9=0.5,1.1=0.5",
        "--nu",
        "atoms:0.5=0.25,1.0=0.5,1.5=0.25",
        "--payoff",
        "straddle1:alpha=1",
        "--atoms",
        "10",
        "--json",
        "--hedge",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let json: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert!((json["min"].as_f64().unwrap() - 134.0 / 495.0).abs() < 1e-9);
    assert!((json["max"].as_f64().unwrap() - 146.0 / 495.0).abs() < 1e-9);
    assert!(json["duality_gap_min"].as_f64().unwrap() < 1e-8);
    assert!(json["hedge_min"]["max_violation"].as_f64().unwrap() < 1e-8);
}

#[test]
fn verify_oracle_with_instance_passes() {
    let o = run(&[
        "verify",
        "--suite",
        "oracle",
        "--atoms",
        "40",
        "--instance",
        &fixture("instance_2x3.txt"),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    assert!(text.contains("PASS instance_discrete_convex_order"));
    assert!(text.contains("PASS instance_duality_gap_min"));
}

#[test]
fn verify_corrupted_instance_fails_with_named_check() {
    let o = run(&[
        "verify",
        "--suite",
        "oracle",
        "--atoms",
        "40",
        "--instance",
        &fixture("instance_2x3_corrupt.txt"),
        "--json",
    ]);
    assert_eq!(o.status.code(), Some(1));
    let json: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(json["pass"], false);
    let failed: Vec<&str> = json["checks"]
        .as_array()
        .unwrap()
        .iter()
        .filter(|c| c["pass"] == false)
        .map(|c| c["name"].as_str().unwrap())
        .collect();
    assert!(
        failed.iter().any(|n| n.starts_with("instance_")),
        "corruption must surface a named instance check, got {failed:?}"
    );
}

#[test]
fn verify_symmetry_suite_passes() {
    let o = run(&["verify", "--suite", "symmetry"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
}
