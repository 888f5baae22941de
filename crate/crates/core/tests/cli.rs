use std::path::Path;
use std::process::{Command, Output};

use edfa::sparse::mm::mm_read;

const CONFIG: &str = r#"
[grid]
nx = 5
ny = 5
nz = 2
dx = 10.0
dy = 10.0
dz = 2.0
dome = { amplitude = 3.0 }

[field]
kind = "synthetic"
seed = 4
kmin = 1e-3
kmax = 1e1
rotate = true

[boundary]
five_spot = { producer = 100.0, injector = 200.0 }

[preconditioner]
pattern = { kind = "dynamic" }
dynamic = { n_add = 1, n_ent = 4 }

[timestep]
dt0 = 0.1
dt_max = 5.0
n_steps = 4

[output]
vtk = true
snapshot_every = 2
history = true

[sweep]
n_add = [1, 2]
n_ent = [2, 4]
"#;

fn edfa(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_edfa")).args(args).output().expect("run edfa")
}

fn setup() -> (tempfile::TempDir, String, String) {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("case.toml");
    std::fs::write(&cfg, CONFIG).unwrap();
    let out = dir.path().join("out");
    (dir, cfg.display().to_string(), out.display().to_string())
}

fn summary(dir: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(dir.join("summary.json")).unwrap()).unwrap()
}

#[test]
fn steady_writes_summary_history_and_vtk() {
    let (_tmp, cfg, out) = setup();
    let o = edfa(&["steady", "-c", &cfg, "-o", &out]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let out = Path::new(&out);
    let s = summary(out);
    assert_eq!(s["mode"], "steady");
    assert!(s["total_it"].as_u64().unwrap() > 0);
    assert!(s["mu"].as_f64().unwrap() > 1.0);
    assert!(out.join("history.csv").exists());
    let vtk = std::fs::read_to_string(out.join("pressure.vtk")).unwrap();
    assert!(vtk.contains("pressure") && vtk.contains("kxx"));
}

#[test]
fn transient_writes_one_row_per_step() {
    let (_tmp, cfg, out) = setup();
    let o = edfa(&["transient", "-c", &cfg, "-o", &out]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let out = Path::new(&out);
    let csv = std::fs::read_to_string(out.join("steps.csv")).unwrap();
    let mut lines = csv.lines();
    assert!(lines.next().unwrap().starts_with("step,time,dt,n_it"));
    assert_eq!(lines.count(), 4);
    assert_eq!(summary(out)["n_steps"], 4);
    assert!(out.join("history_0004.csv").exists());
    assert!(out.join("pressure_0002.vtk").exists());
}

#[test]
fn sweep_covers_the_grid_of_parameters() {
    let (_tmp, cfg, out) = setup();
    let o = edfa(&["sweep", "-c", &cfg, "-o", &out]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(Path::new(&out).join("sweep.csv")).unwrap();
    let rows: Vec<&str> = csv.lines().skip(1).collect();
    assert_eq!(rows.len(), 4);
    assert!(rows[0].starts_with("1,2,"));
    assert!(rows.iter().all(|r| r.contains(",true,")));
}

#[test]
fn export_system_round_trips_through_matrix_market() {
    let (_tmp, cfg, out) = setup();
    let o = edfa(&["export-system", "-c", &cfg, "-o", &out, "--dt", "0.5", "--preconditioner"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let out = Path::new(&out);
    let a_pipi = mm_read(out.join("A_pipi.mtx")).unwrap();
    let a_pip = mm_read(out.join("A_pip.mtx")).unwrap();
    let a = mm_read(out.join("A.mtx")).unwrap();
    assert!(a_pipi.is_symmetric());
    assert_eq!(a.nrows(), a_pipi.nrows() + 50);
    assert_eq!(a_pip.shape(), (a_pipi.nrows(), 50));
    for name in ["G.mtx", "F.mtx", "H.mtx", "S.mtx", "patterns.txt"] {
        assert!(out.join("preconditioner").join(name).exists(), "{name}");
    }
}

#[test]
fn bad_input_fails_with_a_message() {
    let (tmp, _, out) = setup();
    let missing = tmp.path().join("nope.toml").display().to_string();
    let o = edfa(&["steady", "-c", &missing, "-o", &out]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).starts_with("error:"));

    let bad = tmp.path().join("bad.toml");
    std::fs::write(&bad, CONFIG.replace("n_steps = 4", "n_steps = 4\nbogus = 1")).unwrap();
    let o = edfa(&["transient", "-c", &bad.display().to_string(), "-o", &out]);
    assert!(!o.status.success());

    let o = edfa(&["export-system", "-c", &tmp.path().join("case.toml").display().to_string(), "--dt", "-1"]);
    assert!(!o.status.success());
}
