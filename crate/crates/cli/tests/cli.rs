use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use kinfrac_core::kinetic_fv::PhaseField;

const FAST: &str = "\
discretization.nx = 64
discretization.nv = 33
experiment.eps_list = 0.4, 0.2, 0.1
experiment.t_final = 0.2
experiment.snapshot_times = 0, 0.1
experiment.phi_t_end = 0.2
output.formats = json, csv, gnuplot, binary
";

fn kinfrac(dir: &Path, args: &[&str]) -> Output {
    let cfg = dir.join("run.cfg");
    if !cfg.exists() {
        fs::write(&cfg, FAST).unwrap();
    }
    Command::new(env!("CARGO_BIN_EXE_kinfrac"))
        .arg("--config")
        .arg(&cfg)
        .arg("--out")
        .arg(dir.join("out"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn model_info_is_json() {
    let dir = tempfile::tempdir().unwrap();
    let o = kinfrac(dir.path(), &["model-info"]);
    assert_eq!(o.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["gamma"], 1.5);
    assert_eq!(v["coercivity"], 2.0);
    let m: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("out/model_info.json")).unwrap())
            .unwrap();
    assert_eq!(m["schema_version"], 1);
    assert_eq!(m["kind"], "model-info");
    assert_eq!(m["config"]["discretization"]["nx"], 64);
}

#[test]
fn config_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("run.cfg"), "model.alpha = 1.5\nmodel.beta = 1.4\n").unwrap();
    let o = kinfrac(dir.path(), &["model-info"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("2-alpha = 0.5"));

    fs::write(dir.path().join("run.cfg"), "model.alpah = 1.5\n").unwrap();
    let o = kinfrac(dir.path(), &["model-info"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 1"));

    let o = kinfrac(dir.path(), &["no-such-command"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn failed_verdict_exits_1() {
    let dir = tempfile::tempdir().unwrap();
    // α = 1.5 at ε ≥ 0.05 is far from the limit: 5% is not reached
    let o = kinfrac(dir.path(), &["limit-check", "--eps", "0.2,0.1,0.05", "--x", "10"]);
    assert_eq!(o.status.code(), Some(1), "{}", stdout(&o));
    assert!(stdout(&o).contains("FAIL [C1]"));
}

#[test]
fn kinetic_det_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let o = kinfrac(dir.path(), &["kinetic-det", "--eps", "0.3", "--scheme", "upwind"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let out = dir.path().join("out");
    let rho = fs::read_to_string(out.join("det_density.csv")).unwrap();
    assert!(rho.starts_with("x,rho\n"));
    assert_eq!(rho.lines().count(), 65);
    let g = fs::read_to_string(out.join("gnorm.csv")).unwrap();
    assert!(g.starts_with("t,gnorm2,bound\n"));
    let f = PhaseField::load(&out.join("phase_t0.100000.bin")).unwrap();
    assert_eq!((f.nx, f.nv), (64, 33));
    assert_eq!(f.length, 20.0);
    assert!((f.time - 0.1).abs() < 1e-12);
}

#[test]
fn kinetic_mc_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let o = kinfrac(dir.path(), &["--seed", "7", "kinetic-mc", "-n", "5000", "--eps", "0.5"]);
    assert_eq!(o.status.code(), Some(0));
    let m: serde_json::Value = serde_json::from_str(
        &fs::read_to_string(dir.path().join("out/mc_manifest.json")).unwrap(),
    )
    .unwrap();
    assert_eq!(m["result"]["particles"], 5000);
    assert_eq!(m["result"]["seed"], 7);
    assert_eq!(m["result"]["mass"], 1.0);
    assert!(m["result"]["collisions"].as_u64().unwrap() > 0);
}

#[test]
fn kernel_matrix_shape() {
    let dir = tempfile::tempdir().unwrap();
    let o = kinfrac(dir.path(), &["kernel", "--nx", "16"]);
    assert_eq!(o.status.code(), Some(0));
    let text = fs::read_to_string(dir.path().join("out/kernel.csv")).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 17);
    assert_eq!(lines[0].split(',').count(), 17);
}

#[test]
fn sweep_is_reproducible_and_quiet() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let oa = kinfrac(a.path(), &["--quiet", "sweep"]);
    let ob = kinfrac(b.path(), &["--quiet", "--threads", "1", "sweep"]);
    assert_eq!(oa.status.code(), Some(0));
    assert_eq!(ob.status.code(), Some(0));
    assert!(oa.stdout.is_empty());
    let ra = fs::read(a.path().join("out/sweep.json")).unwrap();
    let rb = fs::read(b.path().join("out/sweep.json")).unwrap();
    assert_eq!(ra, rb);
    for f in ["convergence.csv", "convergence.dat", "convergence.gp", "rho_limit.csv"] {
        assert!(a.path().join("out").join(f).exists(), "{f}");
    }
    let report: serde_json::Value = serde_json::from_slice(&ra).unwrap();
    assert_eq!(report["rows"].as_array().unwrap().len(), 3);
    assert!(report["verdicts"]
        .as_array()
        .unwrap()
        .iter()
        .all(|v| (1..=10).contains(&v["criterion"].as_u64().unwrap())));
}

#[test]
fn macro_solve_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let o = kinfrac(dir.path(), &["macro-solve", "--dt", "0.01"]);
    assert_eq!(o.status.code(), Some(0));
    let m: serde_json::Value = serde_json::from_str(
        &fs::read_to_string(dir.path().join("out/macro_manifest.json")).unwrap(),
    )
    .unwrap();
    let r = &m["result"];
    assert_eq!(r["nx"], 64);
    assert_eq!(r["images"], 8);
    assert!(r["symbol_constant"].as_f64().unwrap() > 0.0);
    assert!(dir.path().join("out/macro_t0.100000.csv").exists());
}
