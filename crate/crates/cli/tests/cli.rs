//! The `sqg` binary: exit codes, messages and written files.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn sqg(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sqg"))
        .args(args)
        .current_dir(cwd)
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

const CONFIG: &str = "\
# short smooth convection
scenario = smooth_convection
n_side = 12
t_final = 0.5
";

#[test]
fn run_writes_outputs_with_overrides() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("case.cfg"), CONFIG).unwrap();
    let o = sqg(
        &[
            "run",
            "case.cfg",
            "--out",
            "res",
            "--seed",
            "7",
            "--override",
            "cfl=0.1",
        ],
        dir.path(),
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let res = dir.path().join("res");
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(res.join("run_manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["status"], "completed");
    assert_eq!(manifest["config"]["cfl"], "0.1");
    assert_eq!(manifest["config"]["seed"], "7");
    let ts = fs::read_to_string(res.join("timeseries.csv")).unwrap();
    assert!(ts.starts_with(
        "t,dt,kinetic_energy,helicity_integral,helicity_signed,grad_sup_norm,theta_min,theta_max\n"
    ));
    let errors = fs::read_to_string(res.join("errors.csv")).unwrap();
    assert!(errors.starts_with("dofs,L1,rate,L2,rate,Linf,rate\n"));
}

#[test]
fn bad_inputs_exit_nonzero_with_message() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("case.cfg"), CONFIG).unwrap();
    let cases: [(&[&str], &str); 4] = [
        (&["run", "missing.cfg"], "missing.cfg"),
        (&["run", "case.cfg", "--override", "cfl=0.9"], "cfl"),
        (&["run", "case.cfg", "--override", "colour=red"], "colour"),
        (&["table1", "--max-dofs", "50"], "max-dofs"),
    ];
    for (args, needle) in cases {
        let o = sqg(args, dir.path());
        assert!(!o.status.success(), "{args:?} succeeded");
        assert!(stderr(&o).contains(needle), "{args:?}: {}", stderr(&o));
    }
}

#[test]
fn table1_prints_rates_and_writes_tables() {
    let dir = tempfile::tempdir().unwrap();
    let o = sqg(&["table1", "--max-dofs", "400", "--out", "t1"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let out = String::from_utf8_lossy(&o.stdout);
    assert!(out.contains("smooth convection, galerkin"));
    for block in ["galerkin", "ev", "fct", "ev_max", "fct_max"] {
        let t = fs::read_to_string(dir.path().join("t1").join(block).join("errors.csv")).unwrap();
        assert_eq!(t.lines().count(), 3, "{block}");
    }
}
