use std::path::Path;
use std::process::{Command, Output};

use logcert::lab::GridField;
use serde_json::Value;

fn logcert(out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_logcert"))
        .arg("--out")
        .arg(out)
        .args(args)
        .env_remove("LOGMOD_THREADS")
        .output()
        .expect("binary runs")
}

fn report(out: &Path, command: &str) -> Value {
    let text = std::fs::read_to_string(out.join(format!("{}.json", command.replace(' ', "-")))).unwrap();
    serde_json::from_str(&text).unwrap()
}

#[test]
fn chain_build_on_the_z_axis_emits_a_certificate() {
    let dir = tempfile::tempdir().unwrap();
    let o = logcert(dir.path(), &["chain", "build"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let r = report(dir.path(), "chain build");
    assert_eq!(r["status"], "pass");
    assert_eq!(r["certificate"]["clearance_constant"], 6.0);
    assert_eq!(r["metrics"]["vertices"], 5);
    assert_eq!(r["artifacts"][0], "chain-build.csv");
    assert!(dir.path().join("chain-build.csv").exists());
}

#[test]
fn unknown_flag_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = logcert(dir.path(), &["chain", "build", "--frobnicate"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("Usage"));
    let o = logcert(dir.path(), &["teleport"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn planted_violation_fails_with_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let o = logcert(dir.path(), &["logmod", "verify", "--pairs", "500", "--plant"]);
    assert_eq!(o.status.code(), Some(2));
    let r = report(dir.path(), "logmod verify");
    assert_eq!(r["status"], "fail");
    assert!(r["metrics"]["verification"]["violation_count"].as_u64().unwrap() >= 1);
    let o = logcert(dir.path(), &["logmod", "verify", "--pairs", "500"]);
    assert_eq!(o.status.code(), Some(0));
}

#[test]
fn reports_are_byte_identical_across_runs_and_thread_counts() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let args = ["lab", "jensen", "--nodes", "256", "--salt", "0.1"];
    let oa = logcert(a.path(), &[&["--threads", "1"], &args[..]].concat());
    let ob = logcert(b.path(), &[&["--threads", "3"], &args[..]].concat());
    assert!(oa.status.code().is_some_and(|c| c != 1), "{}", String::from_utf8_lossy(&oa.stderr));
    assert_eq!(oa.stdout, ob.stdout);
    for f in ["lab-jensen.json", "lab-jensen.csv"] {
        assert_eq!(std::fs::read(a.path().join(f)).unwrap(), std::fs::read(b.path().join(f)).unwrap());
    }
    let oc = logcert(a.path(), &["--seed", "9", "lab", "jensen", "--nodes", "256", "--salt", "0.1"]);
    assert_ne!(oa.stdout, oc.stdout);
}

#[test]
fn config_fills_in_and_flags_win() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.json");
    std::fs::write(&cfg, r#"{"seed": 4, "budget": {"bootstrap": {"start": 0.5, "target": 3.0}}}"#).unwrap();
    let cfg = cfg.to_str().unwrap();
    let o = logcert(dir.path(), &["--config", cfg, "budget", "bootstrap"]);
    assert_eq!(o.status.code(), Some(0));
    let r = report(dir.path(), "budget bootstrap");
    assert_eq!(r["seed"], 4);
    assert_eq!(r["metrics"]["sequence"], serde_json::json!([0.5, 0.75, 1.3125, 3.03515625]));
    let o = logcert(dir.path(), &["--config", cfg, "budget", "bootstrap", "--target", "100", "--max-steps", "4"]);
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(report(dir.path(), "budget bootstrap")["metrics"]["steps"], 5);
}

#[test]
fn unknown_config_keys_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.json");
    std::fs::write(&cfg, r#"{"budget": {"bootstrap": {"strat": 0.5}}}"#).unwrap();
    let o = logcert(dir.path(), &["--config", cfg.to_str().unwrap(), "budget", "bootstrap"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("strat"));
}

#[test]
fn every_subcommand_has_a_passing_selftest() {
    let dir = tempfile::tempdir().unwrap();
    for cmd in [
        "chain build",
        "logmod propagate",
        "logmod verify",
        "blowup check",
        "blowup calibrate",
        "blowup transfer",
        "budget sweep",
        "budget bootstrap",
        "lab jensen",
        "lab mass",
        "lab mollify",
        "lab campanato",
        "lab fitmod",
    ] {
        let mut args: Vec<&str> = cmd.split(' ').collect();
        args.push("--selftest");
        let o = logcert(dir.path(), &args);
        assert_eq!(o.status.code(), Some(0), "{cmd}: {}", String::from_utf8_lossy(&o.stdout));
        assert_eq!(report(dir.path(), &format!("{cmd} selftest"))["status"], "pass");
    }
}

#[test]
fn field_files_and_gnuplot_scripts() {
    let dir = tempfile::tempdir().unwrap();
    let u = GridField::from_fn(257, -0.5, 0.5, |x, y| x.hypot(y).ln().abs().powi(-3).min(1.0)).unwrap();
    let csv = dir.path().join("u.csv");
    u.write_csv(std::fs::File::create(&csv).unwrap()).unwrap();
    let bin = dir.path().join("u.gf");
    u.write_binary(std::fs::File::create(&bin).unwrap()).unwrap();
    let mut exponents = Vec::new();
    for path in [&csv, &bin] {
        let o = logcert(
            dir.path(),
            &["--gnuplot-script", "lab", "fitmod", "--field", path.to_str().unwrap(), "--separations", "5"],
        );
        assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
        let r = report(dir.path(), "lab fitmod");
        exponents.push(r["metrics"]["exponent"].as_f64().unwrap());
        assert_eq!(r["artifacts"], serde_json::json!(["lab-fitmod.csv", "lab-fitmod.gp"]));
    }
    assert_eq!(exponents[0], exponents[1]);
    let gp = std::fs::read_to_string(dir.path().join("lab-fitmod.gp")).unwrap();
    assert!(gp.contains("plot 'lab-fitmod.csv'"));
    let o = logcert(dir.path(), &["lab", "fitmod", "--field", "missing.csv"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn lab_mass_flags_the_unclipped_log() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(logcert(dir.path(), &["lab", "mass"]).status.code(), Some(0));
    assert_eq!(logcert(dir.path(), &["lab", "mass", "--profile", "log"]).status.code(), Some(2));
    let o = logcert(dir.path(), &["lab", "mass", "--profile", "log", "--expect", "positive"]);
    assert_eq!(o.status.code(), Some(0));
}

#[test]
fn bad_thread_env_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_logcert"))
        .args(["--out", dir.path().to_str().unwrap(), "budget", "bootstrap"])
        .env("LOGMOD_THREADS", "many")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("LOGMOD_THREADS"));
}
