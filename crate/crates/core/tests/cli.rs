use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use gn_plate::config::{parse_config, ExperimentKind};

const MATERIAL: &str = "[material]
lambda = 1
mu = 1
d1 = 0.1
d2 = 0.1
c = 1
kappa = 0.2
r = 1
k1 = 1
h1 = 1
hbar1 = 0.2
k2 = 0.5
h2 = 0.5
hbar2 = 0.1
rho = 1
h = 0.5
model_type = TypeIII
";

fn configs_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs")
}

fn gn_plate(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gn-plate"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, body: &str) -> PathBuf {
    let path = dir.join("run.cfg");
    fs::write(&path, format!("{MATERIAL}\n{body}")).unwrap();
    path
}

fn run_in(dir: &Path, cfg: &Path, out: &str) -> (Output, PathBuf) {
    let out_dir = dir.join(out);
    let o = gn_plate(&["run", cfg.to_str().unwrap(), "--out", out_dir.to_str().unwrap()]);
    (o, out_dir)
}

fn summary_rows(dir: &Path) -> Vec<Vec<String>> {
    let mut r = csv::Reader::from_path(dir.join("summary.csv")).unwrap();
    assert_eq!(r.headers().unwrap(), vec!["criterion", "value", "threshold", "pass"]);
    r.records().map(|rec| rec.unwrap().iter().map(String::from).collect()).collect()
}

const SMALL_BUMP: &str = "[grid]
Lx = 1
Ly = 1
nx = 8
ny = 8

[time]
dt = 0.01
t_end = 0.2
snapshot_every = 10

[experiment]
name = type3_decay

[ic]
preset = gaussian_bump
target_field = w
center = 0.5, 0.5
width = 0.2
";

#[test]
fn shipped_configs_parse() {
    let mut kinds = Vec::new();
    for entry in fs::read_dir(configs_dir()).unwrap() {
        let path = entry.unwrap().path();
        let cfg = parse_config(&fs::read_to_string(&path).unwrap())
            .unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        kinds.push(cfg.experiment.kind.expect("every shipped config names an experiment"));
    }
    for k in ExperimentKind::ALL {
        assert!(kinds.contains(&k), "no shipped config runs {}", k.name());
    }
}

#[test]
fn validate_reports_conditions() {
    let o = gn_plate(&["validate", configs_dir().join("type3_decay.cfg").to_str().unwrap()]);
    assert!(o.status.success());
    let text = String::from_utf8(o.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("condition,margin,pass"));
    let rows: Vec<&str> = lines.collect();
    assert!(!rows.is_empty());
    assert!(rows.iter().all(|l| l.ends_with(",pass")));
}

#[test]
fn validate_fails_on_bad_material() {
    let dir = tempfile::tempdir().unwrap();
    let text = fs::read_to_string(configs_dir().join("type3_decay.cfg"))
        .unwrap()
        .replace("kappa = 0.2", "kappa = 5");
    let path = dir.path().join("bad.cfg");
    fs::write(&path, text).unwrap();
    let o = gn_plate(&["validate", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8(o.stdout).unwrap().contains(",fail"));

    // run refuses the same file and leaves an error row behind
    let (o, out) = run_in(dir.path(), &path, "out");
    assert_eq!(o.status.code(), Some(2));
    let rows = summary_rows(&out);
    assert_eq!(rows.len(), 1);
    assert_eq!(rows[0][0], "error");
    assert_eq!(rows[0][3], "fail");
}

#[test]
fn config_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &SMALL_BUMP.replace("dt = 0.01", "dt = 0.01\ndt = 0.02"));
    let (o, _) = run_in(dir.path(), &cfg, "dup");
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8(o.stderr).unwrap().contains("dt"));

    let cfg = write_config(dir.path(), &format!("{SMALL_BUMP}\n[grid]\nnx = 9\n"));
    let (o, _) = run_in(dir.path(), &cfg, "twice");
    assert_eq!(o.status.code(), Some(2));

    let o = gn_plate(&["run", dir.path().join("missing.cfg").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn type3_run_writes_energy_and_snapshots() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL_BUMP);
    let (o, out) = run_in(dir.path(), &cfg, "out");
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let rows = summary_rows(&out);
    let names: Vec<&str> = rows.iter().map(|r| r[0].as_str()).collect();
    assert_eq!(names, ["identity_residual", "balance_residual", "energy_increase"]);
    assert!(rows.iter().all(|r| r[3] == "pass"));

    let mut energy = csv::Reader::from_path(out.join("energy.csv")).unwrap();
    assert_eq!(energy.headers().unwrap(), vec!["t", "E0", "D", "balance_residual", "src_power"]);
    assert_eq!(energy.records().count(), 21);
    for k in [0, 10, 20] {
        for f in ["v1", "theta", "P"] {
            assert!(out.join(format!("{f}_{k}.csv")).exists(), "{f}_{k}.csv");
        }
    }
    assert!(!out.join("w_5.csv").exists());
}

#[test]
fn runs_are_bit_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL_BUMP);
    let (a, out_a) = run_in(dir.path(), &cfg, "a");
    let (b, out_b) = run_in(dir.path(), &cfg, "b");
    assert!(a.status.success() && b.status.success());
    let mut names: Vec<_> = fs::read_dir(&out_a).unwrap().map(|e| e.unwrap().file_name()).collect();
    names.sort();
    assert!(names.len() > 10);
    for name in names {
        assert_eq!(fs::read(out_a.join(&name)).unwrap(), fs::read(out_b.join(&name)).unwrap(), "{name:?}");
    }
}

#[test]
fn resolvent_check_passes() {
    let dir = tempfile::tempdir().unwrap();
    let (o, out) = run_in(dir.path(), &configs_dir().join("resolvent_check.cfg"), "out");
    assert!(o.status.success());
    let rows = summary_rows(&out);
    let names: Vec<&str> = rows.iter().map(|r| r[0].as_str()).collect();
    assert_eq!(names, ["identity_residual", "resolvent_zero", "resolvent_roundtrip"]);
}

#[test]
fn spatial_decay_writes_decay_table() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "[grid]
Lx = 1
Ly = 4
nx = 8
ny = 48

[time]
dt = 0.005
t_end = 0.2
snapshot_every = 5

[experiment]
name = spatial_decay

[ic]
preset = gaussian_bump
target_field = theta
center = 0.5, 0.5
width = 0.12
cutoff = 0.36

[output]
snapshots = false
",
    );
    let (_, out) = run_in(dir.path(), &cfg, "out");
    let names: Vec<String> = summary_rows(&out).into_iter().map(|r| r[0].clone()).collect();
    assert_eq!(names, ["flux_identity_gap", "far_field_ratio", "lemma_margin", "envelope_ratio"]);
    let mut decay = csv::Reader::from_path(out.join("decay.csv")).unwrap();
    assert_eq!(
        decay.headers().unwrap(),
        vec!["t", "z", "J", "E", "E_zz", "lemma_lhs", "lemma_margin", "bound", "ratio"]
    );
    assert!(decay.records().count() > 0);
    assert!(!out.join("theta_5.csv").exists());
}

#[test]
fn backward_and_roundtrip_write_tables() {
    let dir = tempfile::tempdir().unwrap();
    let (o, out) = run_in(dir.path(), &configs_dir().join("backward_uniqueness.cfg"), "bu");
    assert!(o.status.success());
    let mut r = csv::Reader::from_path(out.join("backward.csv")).unwrap();
    assert_eq!(r.headers().unwrap(), vec!["t", "E1", "E2", "E3", "energy_norm"]);
    assert_eq!(r.records().count(), 51);

    let (o, out) = run_in(dir.path(), &configs_dir().join("roundtrip.cfg"), "rt");
    assert!(o.status.success());
    assert!(out.join("energy.csv").exists() && out.join("backward.csv").exists());
    assert_eq!(summary_rows(&out)[0][0], "roundtrip_error");
}
