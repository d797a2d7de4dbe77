use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn config(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)
}

fn run(args: &[&str], config: &Path, out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_merton-eq"))
        .args(args)
        .arg("--config")
        .arg(config)
        .arg("--out-dir")
        .arg(out)
        .output()
        .expect("binary runs")
}

fn read(p: &Path) -> String {
    std::fs::read_to_string(p).unwrap_or_else(|e| panic!("{}: {e}", p.display()))
}

/// Writes `name` from the bundled configs after applying `edit` to its JSON.
fn edited(dir: &Path, name: &str, edit: impl FnOnce(&mut Value)) -> PathBuf {
    let mut v: Value = serde_json::from_str(&read(&config(name))).unwrap();
    edit(&mut v);
    let p = dir.join(name);
    std::fs::write(&p, serde_json::to_string(&v).unwrap()).unwrap();
    p
}

fn csv_column(text: &str, col: &str) -> Vec<f64> {
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let j = header.iter().position(|h| *h == col).unwrap();
    lines.map(|l| l.split(',').nth(j).unwrap().parse().unwrap()).collect()
}

#[test]
fn solve_writes_coefficients_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["solve"], &config("power_equilibrium.json"), dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let pi = read(&dir.path().join("pi.csv"));
    assert_eq!(pi.lines().next(), Some("t,value"));
    assert_eq!(pi.lines().last(), Some("1,1"));
    assert!(read(&dir.path().join("policy.csv")).starts_with("t,x,c_hat,u1\n"));

    let manifest: Value = serde_json::from_str(&read(&dir.path().join("manifest.json"))).unwrap();
    assert_eq!(manifest["seed"], 11);
    assert_eq!(manifest["config"]["utility"]["gamma"], 0.5);
    for f in ["pi.csv", "policy.csv"] {
        assert_eq!(manifest["files"][f].as_str().unwrap().len(), 64);
    }
}

#[test]
fn invalid_gamma_is_a_validation_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = edited(dir.path(), "power_equilibrium.json", |v| v["utility"]["gamma"] = 1.5.into());
    let out = run(&["solve"], &cfg, &dir.path().join("out"));
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("0 < gamma < 1"), "{err}");
}

#[test]
fn unknown_fields_and_missing_config_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = edited(dir.path(), "power_equilibrium.json", |v| v["grid"]["dt"] = 0.01.into());
    assert_eq!(run(&["solve"], &cfg, &dir.path().join("out")).status.code(), Some(1));
    let out = Command::new(env!("CARGO_BIN_EXE_merton-eq")).arg("solve").output().unwrap();
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn runs_are_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config("power_equilibrium.json");
    let (a, b, c) = (dir.path().join("a"), dir.path().join("b"), dir.path().join("c"));
    for d in [&a, &b] {
        assert!(run(&["simulate", "--paths", "500"], &cfg, d).status.success());
        assert!(run(&["solve"], &cfg, d).status.success());
    }
    for f in ["paths.csv", "estimate.csv", "pi.csv", "policy.csv"] {
        assert_eq!(read(&a.join(f)), read(&b.join(f)), "{f}");
    }
    assert!(run(&["simulate", "--paths", "500", "--seed", "12"], &cfg, &c).status.success());
    let (pa, pc) = (read(&a.join("paths.csv")), read(&c.join("paths.csv")));
    assert_ne!(pa, pc);
    assert_eq!(pa.lines().next(), pc.lines().next());
    assert_eq!(pa.lines().count(), pc.lines().count());
}

#[test]
fn riskless_idle_path_grows_at_the_short_rate() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["simulate"], &config("riskless.json"), dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let paths = read(&dir.path().join("paths.csv"));
    assert_eq!(paths.lines().count(), 102);
    let last = paths.lines().last().unwrap();
    let x_t: f64 = last.split(',').nth(2).unwrap().parse().unwrap();
    assert!((x_t - 0.05f64.exp()).abs() < 1e-12, "{x_t}");
    let manifest: Value = serde_json::from_str(&read(&dir.path().join("manifest.json"))).unwrap();
    assert_eq!(manifest["results"]["flagged_fraction"], 0.0);
}

#[test]
fn verify_passes_the_equilibrium() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["verify"], &config("power_equilibrium.json"), dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", read(&dir.path().join("summary.txt")));
    assert!(String::from_utf8_lossy(&out.stdout).contains("verdict: pass"));
    assert!(read(&dir.path().join("summary.txt")).ends_with("verdict: pass\n"));
    let res = read(&dir.path().join("residuals.csv"));
    assert!(res.starts_with("t,x,R_c,R_I,stderr_c,stderr_I\n"));
    assert_eq!(res.lines().count(), 6);
}

#[test]
fn verify_rejects_doubled_consumption() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["verify"], &config("corrupted_policy.json"), dir.path());
    assert_eq!(out.status.code(), Some(3));
    let spikes = read(&dir.path().join("spikes.csv"));
    assert!(spikes.starts_with("t,v_index,epsilon,delta,stderr\n"));
    let improving = spikes.lines().skip(1).any(|l| {
        let f: Vec<&str> = l.split(',').collect();
        let (eps, delta, se): (f64, f64, f64) = (f[2].parse().unwrap(), f[3].parse().unwrap(), f[4].parse().unwrap());
        eps == 0.0 && delta > 3.0 * se
    });
    assert!(improving);
}

#[test]
fn zero_direction_bound_gives_zero_spikes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = edited(dir.path(), "power_equilibrium.json", |v| {
        v["verify"]["direction_bound"] = 0.0.into();
        v["verify"]["spike_paths"] = 1000.into();
    });
    let out_dir = dir.path().join("out");
    let out = run(&["verify"], &cfg, &out_dir);
    assert_eq!(out.status.code(), Some(0));
    let spikes = read(&out_dir.join("spikes.csv"));
    assert!(csv_column(&spikes, "delta").iter().all(|d| *d == 0.0));
    assert!(csv_column(&read(&out_dir.join("residuals.csv")), "R_c").iter().all(|r| r.is_finite()));
}

fn compare_results(name: &str) -> (Value, String) {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["compare"], &config(name), dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let manifest: Value = serde_json::from_str(&read(&dir.path().join("manifest.json"))).unwrap();
    (manifest["results"].clone(), read(&dir.path().join("divergence.csv")))
}

#[test]
fn compare_constant_rate_collapses() {
    let (results, div) = compare_results("compare_constant_rate.json");
    assert!(results["max_consumption_gap"].as_f64().unwrap() <= 1e-6);
    assert_eq!(results["max_investment_gap"], 0.0);
    assert!(div.starts_with("t,family_a,family_b,consumption_gap\n"));
}

#[test]
fn compare_linear_rate_separates_open_loop_and_feedback() {
    let (results, div) = compare_results("compare_linear_rate.json");
    assert_eq!(results["max_investment_gap"], 0.0);
    let gap = div
        .lines()
        .filter(|l| l.contains("karp-openloop-log,solano-feedback-log"))
        .map(|l| l.rsplit(',').next().unwrap().parse::<f64>().unwrap())
        .fold(0.0, f64::max);
    assert!(gap > 1e-6, "{gap}");
}

#[test]
fn compare_power_reports_fixed_point() {
    let (results, _) = compare_results("compare_power.json");
    assert_eq!(results["max_investment_gap"], 0.0);
    assert!(results["solano-feedback-power_iterations"].as_u64().unwrap() <= 200);
}
