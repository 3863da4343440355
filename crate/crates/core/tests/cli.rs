use std::path::Path;
use std::process::Command;

const FLAT: &str = r#"
seed = 4

[manifold]
kind = "torus"
resolution = [16, 16]

[flow]
variant = "static"

[run]
t_end = 2.0
dt = 0.25

[reduced]
orientations = ["backwards"]
sample_times = [0.3, 0.5, 0.7]

[geodesic]
lambda_samples = 16
subset_stride = 1

[checks]
draws = 2
"#;

fn rvlab(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_rvlab")).args(args).output().expect("binary runs")
}

fn write_config(dir: &Path, text: &str) -> String {
    let p = dir.join("c.toml");
    std::fs::write(&p, text).unwrap();
    p.to_string_lossy().into_owned()
}

#[test]
fn run_writes_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), FLAT);
    let out = dir.path().join("out");
    let o = rvlab(&["run", &cfg, "--out", out.to_str().unwrap(), "--threads", "2"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(out.join("volume_backwards.csv")).unwrap();
    assert!(csv.starts_with("# seed = 4\ntime,V,quadrature_error,monotone_so_far\n"), "{csv}");
    assert_eq!(csv.lines().count(), 5);
    assert!(out.join("fields/backwards_000.csv").exists());
    assert!(String::from_utf8_lossy(&o.stdout).contains("volume_monotonicity"));
}

#[test]
fn seed_flag_overrides_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), FLAT);
    let out = dir.path().join("out");
    let o = rvlab(&["check-identities", &cfg, "--out", out.to_str().unwrap(), "--seed", "99"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let summary = std::fs::read_to_string(out.join("summary.txt")).unwrap();
    assert!(summary.starts_with("# seed = 99\n"), "{summary}");
}

#[test]
fn bad_config_exits_with_config_code() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "[manifold]\nkind = \"torus\"\nresolution = [16, 16]\nbogus = 1\n");
    let o = rvlab(&["run", &cfg]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("error"));
    let missing = rvlab(&["run", dir.path().join("nope.toml").to_str().unwrap()]);
    assert_eq!(missing.status.code(), Some(2));
}

#[test]
fn geodesic_subcommand_writes_csv() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), FLAT);
    let out = dir.path().join("out");
    let o = rvlab(&["geodesic", &cfg, "--from", "1,1", "--to", "2,1.5", "--time", "1.5", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let stdout = String::from_utf8_lossy(&o.stdout);
    // backwards from τ origin 2.0: τ₁ = 0.5 and ℓ = |d|²/(4τ₁)
    let ell: f64 = stdout
        .lines()
        .find_map(|l| l.strip_prefix("reduced_distance = "))
        .unwrap()
        .parse()
        .unwrap();
    assert!((ell - 1.25 / 2.0).abs() < 1e-10, "{stdout}");
    let csv = std::fs::read_to_string(out.join("geodesic.csv")).unwrap();
    assert!(csv.lines().nth(1).unwrap().starts_with("lambda,t,x0,x1,residual"));
    assert_eq!(csv.lines().count(), 2 + 17);
}
