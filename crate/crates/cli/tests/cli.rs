use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

const HEAT: &str = "[experiment]
kind = solve
name = heat
[params]
p = 2
q = 2
[domain]
x_min = 0
x_max = 1
t_start = 0
t_end = 0.05
[grid]
cells = 16
dt_scale = 1
[data]
profile = sine
[check]
exact = heat_sine
linf_tol = 5e-2
";

fn dplab(args: &[&str], env_out: Option<&Path>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_dplab"));
    cmd.args(args).env_remove("DPLAB_OUT");
    if let Some(dir) = env_out {
        cmd.env("DPLAB_OUT", dir);
    }
    cmd.output().expect("binary runs")
}

fn write_config(dir: &TempDir, name: &str, text: &str) -> PathBuf {
    let path = dir.path().join(name);
    fs::write(&path, text).unwrap();
    path
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn heat_solve_writes_three_files() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(&dir, "heat.ini", HEAT);
    let out = dir.path().join("out");
    let o = dplab(&["run", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()], None);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let csv = fs::read_to_string(out.join("heat/results.csv")).unwrap();
    assert!(csv.starts_with("t,x,u\n"));
    assert!(!csv.contains('\r'));
    let report = fs::read_to_string(out.join("heat/report.txt")).unwrap();
    assert!(report.contains("PASS linf_error"));
    let plot = fs::read_to_string(out.join("heat/plot.gp")).unwrap();
    assert!(plot.contains("'results.csv'"));
}

#[test]
fn output_is_deterministic() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(
        &dir,
        "cmp.ini",
        "[experiment]\nkind = compare\nname = cmp\nseed = 7\n[compare]\ncount = 3\n[grid]\ncells = 12\nsteps = 8\n",
    );
    let mut csvs = Vec::new();
    for run in ["a", "b"] {
        let out = dir.path().join(run);
        let o = dplab(
            &[
                "run",
                cfg.to_str().unwrap(),
                "--out",
                out.to_str().unwrap(),
                "--threads",
                "2",
            ],
            None,
        );
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
        csvs.push(fs::read(out.join("cmp/results.csv")).unwrap());
    }
    assert_eq!(csvs[0], csvs[1]);
}

#[test]
fn seed_flag_changes_random_problems() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(
        &dir,
        "cmp.ini",
        "[experiment]\nkind = compare\nname = cmp\n[compare]\ncount = 4\n[grid]\ncells = 12\nsteps = 8\n",
    );
    let mut csvs = Vec::new();
    for seed in ["1", "2"] {
        let out = dir.path().join(seed);
        let o = dplab(
            &[
                "run",
                cfg.to_str().unwrap(),
                "--out",
                out.to_str().unwrap(),
                "--seed",
                seed,
            ],
            None,
        );
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
        csvs.push(fs::read_to_string(out.join("cmp/results.csv")).unwrap());
    }
    assert_ne!(csvs[0], csvs[1]);
}

#[test]
fn counterexample_reports_slope() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(
        &dir,
        "ce.ini",
        "[experiment]\nkind = counterexample\nname = ce\n[params]\np = 1.5\nq = 2.5\n[counterexample]\neps = 0.1\nh = 0.1\n",
    );
    let out = dir.path().join("o");
    let o = dplab(&["run", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()], None);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let csv = fs::read_to_string(out.join("ce/results.csv")).unwrap();
    assert!(csv.starts_with("n,I_n,P_n,local_slope\n"));
    assert_eq!(csv.lines().count(), 6);
    assert!(fs::read_to_string(out.join("ce/report.txt"))
        .unwrap()
        .contains("PASS slope"));
}

#[test]
fn env_var_sets_output_directory() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(&dir, "heat.ini", HEAT);
    let out = dir.path().join("from_env");
    let o = dplab(&["run", cfg.to_str().unwrap()], Some(&out));
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(out.join("heat/results.csv").exists());
}

#[test]
fn failed_check_exits_three() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(&dir, "heat.ini", &HEAT.replace("linf_tol = 5e-2", "linf_tol = 1e-9"));
    let o = dplab(
        &["run", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap()],
        None,
    );
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stdout).contains("FAIL linf_error"));
}

#[test]
fn q_below_p_exits_two_naming_the_constraint() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(&dir, "bad.ini", &HEAT.replace("q = 2\n", "q = 1.5\n"));
    let o = dplab(
        &["run", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap()],
        None,
    );
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("q"), "{}", stderr(&o));
}

#[test]
fn runtime_error_exits_one() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(
        &dir,
        "ic.ini",
        "[experiment]\nkind = infconv\nname = ic\n[params]\np = 2\nq = 2\n[infconv]\nell = 1.5\nnx = 10\nnt = 4\n",
    );
    let o = dplab(
        &["run", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap()],
        None,
    );
    assert_eq!(o.status.code(), Some(1), "{}", stderr(&o));
}

#[test]
fn validate_reports_problems_and_ok() {
    let dir = TempDir::new().unwrap();
    let empty = write_config(&dir, "empty.ini", "");
    let o = dplab(&["validate", empty.to_str().unwrap()], None);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("missing keys"));

    let unknown = write_config(&dir, "unknown.ini", "[experiment]\nkind = warp\n");
    let o = dplab(&["validate", unknown.to_str().unwrap()], None);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("warp"));

    let good = write_config(&dir, "heat.ini", HEAT);
    let o = dplab(&["validate", good.to_str().unwrap()], None);
    assert_eq!(o.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&o.stdout).starts_with("ok"));
}

#[test]
fn list_names_every_kind() {
    let o = dplab(&["list"], None);
    let text = String::from_utf8_lossy(&o.stdout);
    for kind in [
        "solve",
        "compare",
        "barrier",
        "modulus",
        "steklov",
        "infconv",
        "caccioppoli",
        "counterexample",
        "psi_scan",
    ] {
        assert!(text.lines().any(|l| l.starts_with(kind)), "{kind}");
    }
}

#[test]
fn shipped_acceptance_configs_validate() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/acceptance");
    let mut n = 0;
    for entry in fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "ini") {
            let o = dplab(&["validate", path.to_str().unwrap()], None);
            assert_eq!(o.status.code(), Some(0), "{}: {}", path.display(), stderr(&o));
            n += 1;
        }
    }
    assert_eq!(n, 12);
}
