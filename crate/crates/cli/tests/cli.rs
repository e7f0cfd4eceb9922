use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use shellnp_cli::config::RunConfig;

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn run(config: &Path, out: &Path, sub: &str) -> Output {
    Command::new(env!("CARGO_BIN_EXE_shellnp"))
        .arg("--config")
        .arg(config)
        .arg("--out")
        .arg(out)
        .arg(sub)
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, text: &str) -> PathBuf {
    let p = dir.join("run.toml");
    fs::write(&p, text).unwrap();
    p
}

fn read_csv(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let text = fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    let header = lines.next().unwrap().split(',').map(String::from).collect();
    let rows = lines.map(|l| l.split(',').map(String::from).collect()).collect();
    (header, rows)
}

fn column(header: &[String], name: &str) -> usize {
    header.iter().position(|h| h == name).unwrap_or_else(|| panic!("missing column {name}"))
}

fn num(s: &str) -> f64 {
    s.parse().unwrap()
}

const DISKS: &str = "
[geometry]
r1 = 1.0
r2 = 2.0
N = 64

[model]
omega_p = 9.06

[solver]
harmonics = 3

[output]
prefix = \"t\"
";

#[test]
fn shipped_configs_round_trip() {
    for entry in fs::read_dir(configs()).unwrap() {
        let path = entry.unwrap().path();
        let cfg = RunConfig::load(&path).unwrap();
        let again = RunConfig::parse(&cfg.to_toml()).unwrap();
        assert_eq!(cfg, again, "{}", path.display());
    }
}

#[test]
fn eigs_of_disks_match_closed_form() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&write_config(dir.path(), DISKS), dir.path(), "eigs");
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let (h, rows) = read_csv(&dir.path().join("t_eigs.csv"));
    let (n, b, l, lt, w, wo) = (
        column(&h, "n"),
        column(&h, "branch"),
        column(&h, "lambda"),
        column(&h, "lambda_tilde"),
        column(&h, "omega"),
        column(&h, "lambda_oracle"),
    );
    let first: Vec<&Vec<String>> = rows.iter().filter(|r| r[n] == "1").collect();
    assert_eq!(first.len(), 4);
    let plus = first.iter().find(|r| r[b] == "+").unwrap();
    let minus = first.iter().find(|r| r[b] == "-").unwrap();
    assert!((num(&plus[l]) - 0.25).abs() < 1e-12);
    assert!((num(&minus[l]) + 0.25).abs() < 1e-12);
    assert!((num(&plus[w]) - 4.53).abs() < 1e-10);
    assert!((num(&minus[w]) - 7.846190).abs() < 1e-6);
    for r in &rows {
        assert_eq!(r[l], r[lt]);
        assert!((num(&r[l]) - num(&r[wo])).abs() < 1e-10);
    }
    assert!(dir.path().join("t_eigs.json").exists());
}

#[test]
fn repeated_runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = configs().join("eps_sweep.toml");
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    assert!(run(&cfg, &a, "sweep").status.success());
    let out = Command::new(env!("CARGO_BIN_EXE_shellnp"))
        .args(["--threads", "1", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&b)
        .arg("sweep")
        .output()
        .unwrap();
    assert!(out.status.success());
    let name = "eps_set2_sweep.csv";
    assert_eq!(fs::read(a.join(name)).unwrap(), fs::read(b.join(name)).unwrap());
}

#[test]
fn splitting_grows_linearly_in_eps() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&configs().join("eps_sweep.toml"), dir.path(), "sweep");
    assert!(out.status.success());
    let (h, rows) = read_csv(&dir.path().join("eps_set2_sweep.csv"));
    let (v, n, p) = (column(&h, "sweep_value"), column(&h, "n"), column(&h, "omega_tilde_plus"));
    let split = |eps: f64| {
        let w: Vec<f64> = rows.iter().filter(|r| num(&r[v]) == eps && r[n] == "2").map(|r| num(&r[p])).collect();
        assert_eq!(w.len(), 2);
        (w[0] - w[1]).abs()
    };
    let ratio = split(0.05) / split(0.01);
    assert!((ratio - 5.0).abs() < 0.5, "ratio {ratio}");
}

#[test]
fn core_sweep_is_monotone() {
    let dir = tempfile::tempdir().unwrap();
    let text = "
[geometry]
r1 = 1.0
r2 = 2.0
delta2 = 64.0
N = 64

[model]
omega_p = 9.06

[sweep]
variable = \"delta1\"
m_start = 5
m_end = -3

[solver]
harmonics = 1

[output]
prefix = \"s\"
";
    let out = run(&write_config(dir.path(), text), dir.path(), "sweep");
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let (h, rows) = read_csv(&dir.path().join("s_sweep.csv"));
    let (v, k, p, m) = (
        column(&h, "sweep_value"),
        column(&h, "branch"),
        column(&h, "omega_tilde_plus"),
        column(&h, "omega_tilde_minus"),
    );
    let rows: Vec<&Vec<String>> = rows.iter().filter(|r| r[k] == "1").collect();
    assert_eq!(rows.len(), 9);
    let reference = 9.06 / 2f64.sqrt();
    // Rows run in ascending delta1, so the shell thins towards the end.
    for pair in rows.windows(2) {
        assert!(num(&pair[0][v]) < num(&pair[1][v]));
        assert!(num(&pair[0][p]) < num(&pair[1][p]));
        assert!(num(&pair[0][m]) > num(&pair[1][m]));
    }
    for r in &rows {
        assert!(num(&r[p]) > reference && num(&r[m]) < reference);
    }
}

#[test]
fn zero_amplitude_spectrum_vanishes() {
    let dir = tempfile::tempdir().unwrap();
    let text = "
[geometry]
r1 = 1.0
r2 = 2.0
N = 32

[model]
omega_p = 9.06

[sweep]
variable = \"delta1\"
values = [1.0, 0.5]

[spectrum]
omega_min = 1.0
omega_max = 9.0
points = 9

[incident]
amplitude = 0.0

[output]
prefix = \"z\"
";
    let out = run(&write_config(dir.path(), text), dir.path(), "spectrum");
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for name in ["z_spectrum_1.csv", "z_spectrum_0.5.csv"] {
        let (h, rows) = read_csv(&dir.path().join(name));
        let i = column(&h, "intensity");
        assert_eq!(rows.len(), 9);
        assert!(rows.iter().all(|r| num(&r[i]) == 0.0), "{name}");
    }
    let gp = fs::read_to_string(dir.path().join("z_spectrum.gp")).unwrap();
    assert!(gp.contains("z_spectrum_1.csv") && gp.contains("z_spectrum_0.5.csv"));
}

#[test]
fn unknown_key_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let text = DISKS.replace("N = 64", "N = 64\nradius = 3.0");
    let out = run(&write_config(dir.path(), &text), dir.path(), "eigs");
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("radius"));
}

#[test]
fn missing_config_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&dir.path().join("absent.toml"), dir.path(), "eigs");
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn overlapping_layers_fail_validation() {
    let dir = tempfile::tempdir().unwrap();
    let text = DISKS.replace("r2 = 2.0", "r2 = 0.9");
    let out = run(&write_config(dir.path(), &text), dir.path(), "validate");
    assert_eq!(out.status.code(), Some(1));
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("t_validate.json")).unwrap()).unwrap();
    assert_eq!(report["passed"], false);
    let geometry = &report["checks"][0];
    assert_eq!(geometry["name"], "geometry");
    assert_eq!(geometry["passed"], false);
    assert!(geometry["detail"].as_str().unwrap().contains("degenerate"));
}

#[test]
fn coarse_near_touching_run_is_flagged() {
    let dir = tempfile::tempdir().unwrap();
    let text = DISKS.replace("r2 = 2.0", "r2 = 1.1").replace("N = 64", "N = 32");
    let out = run(&write_config(dir.path(), &text), dir.path(), "validate");
    assert_eq!(out.status.code(), Some(1));
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("t_validate.json")).unwrap()).unwrap();
    let checks = report["checks"].as_array().unwrap();
    let conv = checks.iter().find(|c| c["name"] == "node_convergence").unwrap();
    assert_eq!(conv["passed"], false);
    assert!(conv["value"].as_f64().unwrap() > 1e-8);
}

#[test]
fn well_resolved_disks_pass_validation() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&write_config(dir.path(), DISKS), dir.path(), "validate");
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stdout));
}
