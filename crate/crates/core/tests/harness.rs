use std::path::Path;
use std::process::Command;

use thermolim::harness::sweep::{run_sweep, AGGREGATE_CSV, AGGREGATE_JSON};
use thermolim::harness::{run_scenario, ScenarioConfig, METRICS_FILE, RECORD_FILE};

const BIN: &str = env!("CARGO_BIN_EXE_thermolim");

fn config(text: &str) -> ScenarioConfig {
    ScenarioConfig::from_toml_str(text).unwrap()
}

fn column(record: &thermolim::harness::RunRecord, name: &str) -> Vec<f64> {
    let j = record.columns.iter().position(|c| c == name).unwrap();
    record.rows.iter().map(|r| r[j]).collect()
}

const SPIN: &str = r#"
study = "spin-classical"
seed = 11
[model]
omega = 1.0
delta = 1.0
g = 0.1
n_atoms = 8
[initial]
spin = "random"
[time]
t_max = 6.283185307179586
n_steps = 32
"#;

const DYSON: &str = r#"
study = "dyson-scaling"
[model]
omega = 1.0
delta = 0.05
g = 0.25
n_atoms = 2
[time]
t_max = 3.141592653589793
n_steps = 1
[sweep]
n_atoms = [16, 2, 8, 4]
"#;

fn strip_metadata(json: &str) -> String {
    json.lines()
        .filter(|l| !l.contains("\"created_unix\"") && !l.contains("\"wall_time_s\""))
        .collect::<Vec<_>>()
        .join("\n")
}

#[test]
fn spin_classical_deviation_column() {
    let r = run_scenario(&config(SPIN), None).unwrap();
    let dev = column(&r, "bruteforce_deviation");
    assert_eq!(dev.len(), 33);
    assert!(dev.iter().all(|d| *d <= 1e-10), "{dev:?}");
    assert!(r.converged());
    assert_eq!(r.config.seed, 11);
}

#[test]
fn free_cat_fidelity_is_one() {
    let text = r#"
study = "cat"
[model]
omega = 1.0
delta = 0.0
g = 0.0
n_atoms = 4
[initial]
alpha = 1.5
[time]
t_max = 3.0
n_steps = 6
"#;
    let r = run_scenario(&config(text), None).unwrap();
    for f in column(&r, "fidelity_vs_exact") {
        assert!((f - 1.0).abs() <= 1e-9);
    }
}

#[test]
fn negative_omega_names_the_field() {
    let text = "study = \"cat\"\n[model]\nomega = -1.0\ndelta = 0.0\ng = 0.1\nn_atoms = 2\n";
    let err = ScenarioConfig::from_toml_str(text)
        .and_then(|c| run_scenario(&c, None))
        .unwrap_err();
    assert!(err.to_string().contains("model.omega"), "{err}");
    let unknown = ScenarioConfig::from_toml_str(&format!("{SPIN}colour = 3\n"));
    assert!(unknown.is_err());
}

#[test]
fn dyson_sweep_reports_fits() {
    let dir = tempfile::tempdir().unwrap();
    let res = run_sweep(&config(DYSON), Some(dir.path()), 0).unwrap();
    assert_eq!(res.points.len(), 4);
    let ns: Vec<f64> = res.points.iter().map(|p| p.axes["n_atoms"]).collect();
    assert_eq!(ns, [2.0, 4.0, 8.0, 16.0]);
    let json: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join(AGGREGATE_JSON)).unwrap())
            .unwrap();
    let fits = json["fits"].as_array().unwrap();
    let keys: Vec<&str> = fits.iter().map(|f| f["key"].as_str().unwrap()).collect();
    for key in [
        "exact_chi_prime_amplitude",
        "first_order_amplitude",
        "second_order_amplitude",
    ] {
        assert!(keys.contains(&key), "{key} missing from {keys:?}");
    }
    for f in fits {
        assert!(f["fit"]["exponent"].as_f64().unwrap().is_finite());
        assert!(f["fit"]["r_squared"].is_number());
    }
    assert!(dir.path().join("point_0003").join(RECORD_FILE).exists());
}

#[test]
fn empty_sweep_is_a_single_run() {
    let text = format!("{SPIN}[sweep]\ng = []\n");
    let cfg = config(&text);
    let dir = tempfile::tempdir().unwrap();
    let swept = run_sweep(&cfg, Some(dir.path()), 1).unwrap();
    assert_eq!(swept.points.len(), 1);
    let direct = run_scenario(&cfg, None).unwrap();
    let point = swept.points[0].outcome.as_ref().unwrap();
    assert_eq!(point.csv_bodies(), direct.csv_bodies());
    assert_eq!(
        std::fs::read_to_string(dir.path().join(METRICS_FILE)).unwrap(),
        direct.metrics_csv()
    );
}

#[test]
fn reordered_sweep_gives_identical_aggregate() {
    let a = format!("{SPIN}[sweep]\nn_atoms = [4, 2, 6]\ndelta = [0.5, 1.5]\n");
    let b = format!("{SPIN}[sweep]\ndelta = [1.5, 0.5, 1.5]\nn_atoms = [6, 4, 2]\n");
    let ra = run_sweep(&config(&a), None, 1).unwrap();
    let rb = run_sweep(&config(&b), None, 2).unwrap();
    assert_eq!(ra.aggregate_csv, rb.aggregate_csv);
    assert_eq!(
        strip_metadata(&ra.aggregate_json),
        strip_metadata(&rb.aggregate_json)
    );
    assert_eq!(ra.points.len(), 6);
}

#[test]
fn manifest_matches_written_files() {
    let text = r#"
study = "wigner"
[model]
omega = 1.0
delta = 0.0
g = 0.1
n_atoms = 2
[initial]
alpha = 1.0
[time]
t_max = 1.0
n_steps = 2
[grid]
margin = 3.0
spacing = 0.25
"#;
    let dir = tempfile::tempdir().unwrap();
    let r = run_scenario(&config(text), Some(dir.path())).unwrap();
    assert_eq!(r.manifest.len(), 4);
    for entry in &r.manifest {
        let len = std::fs::metadata(dir.path().join(&entry.path))
            .unwrap()
            .len();
        assert_eq!(len, entry.bytes, "{}", entry.path);
    }
    let json: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join(RECORD_FILE)).unwrap())
            .unwrap();
    assert_eq!(json["manifest"].as_array().unwrap().len(), 4);
    assert_eq!(json["config"]["grid"]["spacing"], 0.25);
    assert_eq!(json["config"]["tolerances"]["krylov_dim"], 30);
}

fn write_config(dir: &Path, name: &str, text: &str) -> std::path::PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path
}

fn run_cli(args: &[&str]) -> (i32, String) {
    let out = Command::new(BIN).args(args).output().unwrap();
    (
        out.status.code().unwrap(),
        String::from_utf8_lossy(&out.stderr).into_owned(),
    )
}

#[test]
fn cli_writes_plain_csv_and_stable_json() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "spin.toml", SPIN);
    let cfg = cfg.to_str().unwrap();
    let mut jsons = Vec::new();
    for run in ["a", "b"] {
        let out = dir.path().join(run);
        let (code, err) = run_cli(&[
            "spin-classical",
            "--config",
            cfg,
            "--out",
            out.to_str().unwrap(),
            "--workers",
            "1",
        ]);
        assert_eq!(code, 0, "{err}");
        jsons.push(std::fs::read_to_string(out.join(RECORD_FILE)).unwrap());
    }
    let a = std::fs::read_to_string(dir.path().join("a").join(METRICS_FILE)).unwrap();
    let b = std::fs::read_to_string(dir.path().join("b").join(METRICS_FILE)).unwrap();
    assert_eq!(a, b);
    assert!(!a.contains('\r'));
    let mut lines = a.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(header[0], "t");
    for line in lines {
        let cells: Vec<&str> = line.split(',').collect();
        assert_eq!(cells.len(), header.len());
        for c in cells {
            c.parse::<f64>().unwrap();
        }
    }
    assert_eq!(strip_metadata(&jsons[0]), strip_metadata(&jsons[1]));
}

#[test]
fn cli_seed_flag_overrides_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "spin.toml", SPIN);
    let out = dir.path().join("o");
    let (code, err) = run_cli(&[
        "spin-classical",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--seed",
        "99",
    ]);
    assert_eq!(code, 0, "{err}");
    let v: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join(RECORD_FILE)).unwrap()).unwrap();
    assert_eq!(v["config"]["seed"], 99);
}

#[test]
fn cli_emits_binary_wigner_grids() {
    let dir = tempfile::tempdir().unwrap();
    let text = "study = \"wigner\"\n[model]\nomega = 1.0\ndelta = 0.0\ng = 0.1\nn_atoms = 2\n[initial]\nalpha = 1.0\n[time]\nt_max = 1.0\nn_steps = 1\n[grid]\nmargin = 3.0\nspacing = 0.25\n";
    let cfg = write_config(dir.path(), "w.toml", text);
    let out = dir.path().join("o");
    let (code, err) = run_cli(&[
        "wigner",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--emit",
        "wigner-bin",
    ]);
    assert_eq!(code, 0, "{err}");
    let bin = std::fs::read(out.join("wigner_0000.wgrd")).unwrap();
    assert_eq!(&bin[..4], b"WGRD");
    let grid = thermolim::wigner::WignerGrid::read_binary(&bin[..]).unwrap();
    assert_eq!(bin.len(), 32 + 8 * grid.spec.len());
    assert!(!out.join("wigner_0000.csv").exists());
}

#[test]
fn cli_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write_config(
        dir.path(),
        "bad.toml",
        "study = \"cat\"\n[model]\nomega = -1.0\ndelta = 0.0\ng = 0.1\nn_atoms = 2\n",
    );
    let (code, err) = run_cli(&["cat", "--config", bad.to_str().unwrap()]);
    assert_eq!(code, 1);
    assert!(err.contains("model.omega"), "{err}");

    let swept = write_config(dir.path(), "swept.toml", DYSON);
    let (code, err) = run_cli(&["dyson-scaling", "--config", swept.to_str().unwrap()]);
    assert_eq!(code, 1);
    assert!(err.contains("sweep"), "{err}");

    let tight = "study = \"wigner\"\n[model]\nomega = 1.0\ndelta = 0.0\ng = 0.1\nn_atoms = 2\n[initial]\nalpha = 1.0\n[time]\nt_max = 1.0\nn_steps = 1\n[grid]\nmargin = 3.0\nspacing = 0.25\n[tolerances]\nncut = 10\n";
    let failing = write_config(dir.path(), "tight.toml", tight);
    let (code, err) = run_cli(&[
        "wigner",
        "--config",
        failing.to_str().unwrap(),
        "--out",
        dir.path().join("t").to_str().unwrap(),
    ]);
    assert_eq!(code, 1, "{err}");
    assert!(err.contains("cutoff"), "{err}");

    let loose = "study = \"convergence\"\n[model]\nomega = 1.0\ndelta = 0.3\ng = 0.2\nn_atoms = 3\n[time]\nt_max = 2.0\nn_steps = 2\n[tolerances]\nkrylov_dim = 4\nkrylov_tol = 1e-3\nnorm_drift_limit = 1e-3\n";
    let flagged = write_config(dir.path(), "loose.toml", loose);
    let (code, err) = run_cli(&[
        "convergence",
        "--config",
        flagged.to_str().unwrap(),
        "--out",
        dir.path().join("l").to_str().unwrap(),
    ]);
    assert_eq!(code, 2, "{err}");
    assert!(err.contains("krylov_gap"), "{err}");
}

#[test]
fn cli_sweep_writes_aggregates() {
    let dir = tempfile::tempdir().unwrap();
    let text = format!("{SPIN}[sweep]\nn_atoms = [2, 4]\n");
    let cfg = write_config(dir.path(), "s.toml", &text);
    let out = dir.path().join("o");
    let (code, err) = run_cli(&[
        "sweep",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--workers",
        "2",
    ]);
    assert_eq!(code, 0, "{err}");
    let csv = std::fs::read_to_string(out.join(AGGREGATE_CSV)).unwrap();
    assert!(csv.starts_with("point,n_atoms,status,"));
    assert_eq!(csv.lines().count(), 3);
    assert!(out.join("point_0001").join(METRICS_FILE).exists());
}
