use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use quenchbat::models::ising_plateau_closed_form;

fn run(dir: &Path, config: &str, extra: &[&str]) -> Output {
    let path = dir.join("run.toml");
    fs::write(&path, config).unwrap();
    run_path(&path, &dir.join("out"), extra)
}

fn run_path(config: &Path, out: &Path, extra: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_quenchbat"))
        .arg("--config")
        .arg(config)
        .arg("--out")
        .arg(out)
        .args(extra)
        .env_remove("QUENCHBAT_WORKERS")
        .output()
        .unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn rows(path: &Path) -> (String, Vec<(f64, f64)>) {
    let text = fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    let header = lines.next().unwrap().to_string();
    let rows = lines
        .map(|l| {
            let (a, b) = l.split_once(',').unwrap();
            (a.parse().unwrap(), b.parse().unwrap())
        })
        .collect();
    (header, rows)
}

const FIG3: &str = r#"
command = "sweep"

[ising]
h = 0.0

[quench]
to = 1.0

[grid]
n = 300

[thermal]
beta = [0.5, 1.0, "inf"]

[sweep]
over = "b"
start = -3.0
stop = 3.0
step = 0.01
"#;

#[test]
fn ising_temperature_sweep_writes_one_csv_per_beta() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), FIG3, &["--workers", "2"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let out = dir.path().join("out");
    for b in ["0.5", "1", "inf"] {
        assert!(out.join(format!("sweep_beta-{b}.csv")).exists());
    }
    let (header, cold) = rows(&out.join("sweep_beta-inf.csv"));
    assert_eq!(header, "param,value_per_site");
    assert_eq!(cold.len(), 601);
    for (h, e) in &cold {
        let tol = if (h.abs() - 1.0).abs() > 0.1 { 1e-12 } else { 1e-3 };
        assert!((e - ising_plateau_closed_form(*h)).abs() < tol, "h_f = {h}: {e}");
    }
    let (_, warm) = rows(&out.join("sweep_beta-0.5.csv"));
    assert!(warm.iter().zip(&cold).all(|(w, c)| w.1 <= c.1));
}

#[test]
fn manifest_rerun_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), FIG3, &["--workers", "3", "--seed", "11"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let first = dir.path().join("out");
    let manifest: serde_json::Value = serde_json::from_str(&fs::read_to_string(first.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["config_dialect"], "toml-1.0");
    assert_eq!(manifest["version"], env!("CARGO_PKG_VERSION"));
    assert_eq!(manifest["seed"], 11);
    assert_eq!(manifest["workers"], 3);
    assert!(manifest["wall_time_seconds"].as_f64().unwrap() >= 0.0);
    assert!(manifest["grid_convention"].as_str().unwrap().contains("N=300"));
    assert_eq!(manifest["config"]["thermal"]["beta"], serde_json::json!([0.5, 1.0, "inf"]));

    let second = dir.path().join("again");
    let o = run_path(&first.join("manifest.json"), &second, &["--workers", "1"]);
    assert!(o.status.success(), "{}", stderr(&o));
    for name in manifest["outputs"].as_array().unwrap() {
        let name = name.as_str().unwrap();
        assert_eq!(fs::read(first.join(name)).unwrap(), fs::read(second.join(name)).unwrap(), "{name}");
    }
}

#[test]
fn zero_charging_time_stores_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let config = r#"
command = "curve"
[xy]
gamma = 1.0
h = 0.3
[quench]
parameter = "gamma"
to = -0.4
[grid]
n = 32
[thermal]
beta = 2.0
[tau]
values = [0.0]
"#;
    let o = run(dir.path(), config, &[]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = fs::read_to_string(dir.path().join("out/curve.csv")).unwrap();
    assert_eq!(text, "tau,energy_per_site\n0.0,0.0\n");
}

#[test]
fn missing_beta_exits_2_naming_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let config = FIG3.replace("beta = [0.5, 1.0, \"inf\"]", "mu = 0.0");
    let o = run(dir.path(), &config, &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("thermal.beta"), "{}", stderr(&o));
}

#[test]
fn malformed_values_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    for (from, to, field) in [
        ("h = 0.0", "h = \"zero\"", "ising.h"),
        ("step = 0.01", "step = -0.01", "sweep.step"),
        ("n = 300", "n = 0", "grid.n"),
        ("to = 1.0", "to = 1.0\nparameter = \"lambda\"", "quench.parameter"),
    ] {
        let o = run(dir.path(), &FIG3.replace(from, to), &[]);
        assert_eq!(o.status.code(), Some(2), "{field}");
        assert!(stderr(&o).contains(field), "{field}: {}", stderr(&o));
    }
    let o = run(dir.path(), "command = [", &[]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn overflowing_couplings_exit_3() {
    let dir = tempfile::tempdir().unwrap();
    let config = r#"
command = "sweep"
[ssh]
J1 = 1.7e308
J1p = 1.7e308
J2 = 0.0
J3 = 0.0
J3p = 0.0
[quench]
parameter = "J1"
to = 1.0
[grid]
n = 16
[thermal]
beta = 1.0
[sweep]
start = 1.0
stop = 2.0
step = 0.5
"#;
    let o = run(dir.path(), config, &[]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    assert!(stderr(&o).contains("not finite"));
}

#[test]
fn workers_fall_back_to_environment() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("run.toml");
    fs::write(&path, FIG3).unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_quenchbat"))
        .args(["--config", path.to_str().unwrap(), "--out", dir.path().join("out").to_str().unwrap()])
        .env("QUENCHBAT_WORKERS", "2")
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", stderr(&o));
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("out/manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["workers"], 2);
}

#[test]
fn scaling_kinks_power_and_recurrence_commands() {
    let dir = tempfile::tempdir().unwrap();
    let scaling = r#"
command = "scaling"
[cluster]
lambda = 0.7
[quench]
by = 0.3
[thermal]
beta = 10.0
[scaling]
sizes = [50, 100, 200, 400]
"#;
    let o = run(dir.path(), scaling, &[]);
    assert!(o.status.success(), "{}", stderr(&o));
    let (header, pts) = rows(&dir.path().join("out/scaling.csv"));
    assert_eq!(header, "N,p_max");
    assert_eq!(pts.iter().map(|p| p.0).collect::<Vec<_>>(), vec![50.0, 100.0, 200.0, 400.0]);
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("out/manifest.json")).unwrap()).unwrap();
    assert!(manifest["results"]["fit_beta_10"]["r_squared"].as_f64().unwrap() >= 0.999);

    let kinks = r#"
command = "kinks"
[cluster]
lambda = 0.0
[quench]
by = 0.3
[thermal]
beta = 10.0
[sweep]
start = -2.0
stop = 2.0
step = 0.01
"#;
    let o = run(dir.path(), kinks, &[]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = fs::read_to_string(dir.path().join("out/kinks.csv")).unwrap();
    assert!(text.starts_with("param,second_difference\n"));
    let flagged: Vec<f64> = text.lines().skip(1).map(|l| l.split(',').next().unwrap().parse().unwrap()).collect();
    assert!(flagged.iter().any(|x| (x + 1.3).abs() < 0.011) && flagged.iter().any(|x| (x - 0.7).abs() < 0.011));

    let power = r#"
command = "power"
[ssh]
delta1 = -7.5
[quench]
parameter = "delta1"
by = 7.0
[grid]
n = 100
[thermal]
beta = 10.0
"#;
    let o = run(dir.path(), power, &[]);
    assert!(o.status.success(), "{}", stderr(&o));
    let (header, p) = rows(&dir.path().join("out/power.csv"));
    assert_eq!(header, "param,value_per_site");
    assert_eq!(p.len(), 1);
    assert_eq!(p[0].0, -0.5);
    assert!(p[0].1 > 0.0);

    let recurrence = power.replace("\"power\"", "\"recurrence\"");
    let o = run(dir.path(), &recurrence, &[]);
    assert!(o.status.success(), "{}", stderr(&o));
    let (_, r) = rows(&dir.path().join("out/recurrence.csv"));
    assert!(r[0].1 > 0.0);
    let no_ring = recurrence.replace("n = 100", "");
    assert_eq!(run(dir.path(), &no_ring, &[]).status.code(), Some(2));
}
