use std::path::Path;
use std::process::{Command, Output};

fn npsl(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_npsl")).args(args).env_remove("NPSL_THREADS").output().expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn digest_line(path: &Path) -> String {
    std::fs::read_to_string(path).unwrap().lines().next().unwrap().to_string()
}

#[test]
fn sphere_spectrum_csv() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("spec.csv");
    let out = npsl(&["spectrum", "--surface", "sphere:1", "--resolution", "32", "--out", csv.to_str().unwrap()]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(&csv).unwrap();
    let mut lines = text.lines();
    assert!(lines.next().unwrap().starts_with("# config_digest="));
    assert_eq!(lines.next(), Some("index,lambda,c_weight,multiplicity_group"));
    let first: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert!((first[1].parse::<f64>().unwrap() - 0.5).abs() < 1e-10);
    assert!((first[2].parse::<f64>().unwrap() - 1.0).abs() < 1e-8);
    assert_eq!(stdout(&out).lines().count(), 1);
}

#[test]
fn spheroid_localization_report() {
    let dir = tempfile::tempdir().unwrap();
    let json = dir.path().join("loc.json");
    let out = npsl(&[
        "localize", "--surface", "spheroid:1,1,3", "--p", "pole", "--q", "equator", "--alpha", "-0.5",
        "--band-count", "50", "--out", json.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&json).unwrap()).unwrap();
    assert!(v["empirical_ratio"].as_f64().unwrap() > 1.0);
    assert_eq!(v["band"]["count"].as_u64(), Some(50));
    assert_eq!(v["config_digest"].as_str().unwrap().len(), 64);
}

#[test]
fn sphere_variety_volume_is_two_pi() {
    let out = npsl(&["variety", "--surface", "sphere:1", "--alpha", "0"]);
    assert_eq!(code(&out), 0);
    let v: f64 = stdout(&out).trim().parse().unwrap();
    assert!((v - 2.0 * std::f64::consts::PI).abs() < 1e-10);
}

#[test]
fn validation_errors_exit_with_two() {
    for args in [
        vec!["spectrum", "--surface", "blob:1"],
        vec!["spectrum", "--surface", "sphere:1", "--resolution", "3"],
        vec!["falpha", "--kappas", "1,1", "--variant", "nope"],
        vec!["no-such-command"],
        vec!["variety", "--surface", "sphere:1", "--p", "north"],
    ] {
        let out = npsl(&args);
        assert_eq!(code(&out), 2, "{args:?}");
        assert!(!out.stderr.is_empty());
    }
    let out = Command::new(env!("CARGO_BIN_EXE_npsl"))
        .args(["falpha", "--kappas", "1,1"])
        .env("NPSL_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(code(&out), 2);
}

#[test]
fn config_files_are_strict() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "surface = \"sphere:1\"\nresolutoin = 16\n").unwrap();
    let out = npsl(&["--config", bad.to_str().unwrap(), "surface-info"]);
    assert_eq!(code(&out), 2);

    let good = dir.path().join("good.toml");
    std::fs::write(&good, "surface = \"sphere:1\"\nalpha = 0.0\n").unwrap();
    let out = npsl(&["--config", good.to_str().unwrap(), "variety"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    // Flags override the file.
    let over = npsl(&["--config", good.to_str().unwrap(), "variety", "--alpha", "0.5", "--surface", "sphere:2"]);
    let v: f64 = stdout(&over).trim().parse().unwrap();
    // Volume scales as R^-(2 + 2 alpha).
    assert!((v - 2.0 * std::f64::consts::PI / 8.0).abs() < 1e-10, "{v}");
}

#[test]
fn numerical_failures_exit_with_three() {
    // A bump this small covers too few nodes.
    let out = npsl(&[
        "localize", "--surface", "sphere:1", "--resolution", "12", "--band-min", "0.05", "--band-max", "0.2",
        "--delta", "0.01",
    ]);
    assert_eq!(code(&out), 3, "{}", String::from_utf8_lossy(&out.stderr));
    // Saddle points violate the nondegeneracy assumption.
    let out = npsl(&["variety", "--kappas", "1,-1", "--alpha", "-1.5"]);
    assert_eq!(code(&out), 3, "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn outputs_are_deterministic_and_carry_the_digest() {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str| {
        let path = dir.path().join(name);
        let out = npsl(&[
            "flow", "--surface", "ellipsoid:1,1,2", "--t-end", "5", "--out", path.to_str().unwrap(),
        ]);
        assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
        path
    };
    let (a, b) = (run("a.csv"), run("b.csv"));
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    assert!(digest_line(&a).starts_with("# config_digest="));
    let header = std::fs::read_to_string(&a).unwrap().lines().nth(1).unwrap().to_string();
    assert_eq!(header, "t,u1,u2,xi1,xi2,H");

    let c = dir.path().join("c.csv");
    npsl(&["flow", "--surface", "ellipsoid:1,1,2", "--t-end", "6", "--out", c.to_str().unwrap()]);
    assert_ne!(digest_line(&a), digest_line(&c));
}

#[test]
fn binary_dumps_have_sidecars() {
    let dir = tempfile::tempdir().unwrap();
    let prefix = dir.path().join("ops");
    let ef = dir.path().join("phi.bin");
    let out = npsl(&[
        "spectrum", "--surface", "ellipsoid:1,1.2,0.9", "--resolution", "8", "--operators", prefix.to_str().unwrap(),
        "--eigenfunctions", ef.to_str().unwrap(), "--out", dir.path().join("s.csv").to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    for side in ["ops.single.json", "ops.npstar.json", "phi.json"] {
        let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join(side)).unwrap()).unwrap();
        assert_eq!(v["config_digest"].as_str().unwrap().len(), 64);
        assert_eq!(v["layout"], "row-major little-endian");
    }
}

#[test]
fn helmholtz_and_scatter_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let drift = dir.path().join("drift.csv");
    let out = npsl(&["helmholtz-drift", "--surface", "sphere:1", "--resolution", "8", "--out", drift.to_str().unwrap()]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(&drift).unwrap();
    assert_eq!(text.lines().nth(1), Some("omega,mu1_re,mu1_im,lambda_drift,residual,iterations"));
    assert_eq!(text.lines().count(), 2 + 5);

    let field = dir.path().join("field.csv");
    let out = npsl(&["scatter", "--surface", "sphere:1", "--resolution", "8", "--samples", "8", "--out", field.to_str().unwrap()]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(std::fs::read_to_string(&field).unwrap().lines().nth(1), Some("x,y,z,re_u,im_u"));
}

#[test]
fn selftest_subset() {
    let out = npsl(&["selftest", "--criteria", "4,6"]);
    assert_eq!(code(&out), 0);
    let text = stdout(&out);
    let lines: Vec<&str> = text.lines().filter(|l| l.starts_with("PASS") || l.starts_with("FAIL")).collect();
    assert_eq!(lines.len(), 2, "{text}");
    assert!(lines.iter().all(|l| l.starts_with("PASS")));
    assert_eq!(text.lines().last(), Some("2/2 criteria passed"));
    assert_eq!(code(&npsl(&["selftest", "--criteria", "15"])), 2);
}
