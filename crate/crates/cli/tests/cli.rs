use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command as Proc;

use fermimirror_cli::csv::{self, all_headers};
use fermimirror_cli::record::{verify_manifest, RunRecord, RECORD_FILE};
use fermimirror_cli::{parse_config, run, Command, Overrides, Verdict};

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

fn bin() -> Proc {
    Proc::new(env!("CARGO_BIN_EXE_fermimirror"))
}

fn first_line(path: &Path) -> String {
    fs::read_to_string(path).unwrap().lines().next().unwrap().to_string()
}

fn record(dir: &Path) -> RunRecord {
    serde_json::from_slice(&fs::read(dir.join(RECORD_FILE)).unwrap()).unwrap()
}

#[test]
fn golden_headers() {
    let expected = [
        ("sweep.csv", "sweep_value,branch_index,n,X_M,delta_tilde,stability,fold_flag"),
        ("steady.csv", "branch_index,n,c_s,X_M,delta_tilde,residual,fold_flag,stability,max_re_lambda"),
        (
            "spectrum.csv",
            "omega,S_XM,S_Xc,S_Pc,S_XM_closed_form,S_Xc_closed_form,S_Pc_closed_form,S_Xc_corrected,S_Pc_corrected",
        ),
        ("trajectory.csv (linear)", "t,X_M,P_M,X,P"),
        ("trajectory.csv (meanfield)", "t,X_M,P_M,Re_c,Im_c,n"),
        ("periodogram.csv", "omega,S_XM_welch,S_XM_transfer"),
    ];
    assert_eq!(all_headers(), expected);
}

#[test]
fn written_files_carry_the_headers() {
    let cfg = parse_config(&fixture("p1.json")).unwrap();
    let tmp = tempfile::tempdir().unwrap();
    for (cmd, file, header) in [
        (Command::Steady, "steady.csv", csv::STEADY_HEADER),
        (Command::Sweep, "sweep.csv", csv::SWEEP_HEADER),
        (Command::Spectrum, "spectrum.csv", csv::SPECTRUM_HEADER),
        (Command::Simulate, "trajectory.csv", csv::LINEAR_TRAJECTORY_HEADER),
        (Command::Simulate, "periodogram.csv", csv::PERIODOGRAM_HEADER),
    ] {
        let dir = tmp.path().join(cmd.name());
        let out = run(cmd, &cfg, &Overrides::default(), &dir).unwrap();
        assert_eq!(out.verdict, Verdict::Ok);
        assert_eq!(first_line(&dir.join(file)), header, "{file}");
    }
}

#[test]
fn reruns_are_byte_identical() {
    let cfg = parse_config(&fixture("p1.json")).unwrap();
    let tmp = tempfile::tempdir().unwrap();
    for cmd in [Command::Sweep, Command::Spectrum, Command::Simulate] {
        let a = tmp.path().join(format!("{}_a", cmd.name()));
        let b = tmp.path().join(format!("{}_b", cmd.name()));
        let ra = run(cmd, &cfg, &Overrides::default(), &a).unwrap().record;
        let rb = run(cmd, &cfg, &Overrides::default(), &b).unwrap().record;
        assert!(!ra.files.is_empty());
        assert_eq!(ra.files, rb.files, "{}", cmd.name());
        assert_eq!(ra.model_hash, rb.model_hash);
    }
}

#[test]
fn seed_override_changes_the_trajectory() {
    let cfg = parse_config(&fixture("p1.json")).unwrap();
    let tmp = tempfile::tempdir().unwrap();
    let a = run(Command::Simulate, &cfg, &Overrides::default(), &tmp.path().join("a")).unwrap().record;
    let ov = Overrides { seed: Some(8), ..Default::default() };
    let b = run(Command::Simulate, &cfg, &ov, &tmp.path().join("b")).unwrap().record;
    assert_eq!(a.seeds, vec![7]);
    assert_eq!(b.seeds, vec![8]);
    assert_ne!(a.files[0].sha256, b.files[0].sha256);
    assert!(a.rng.as_deref().unwrap().contains("ChaCha"));
}

#[test]
fn manifest_matches_disk_and_detects_edits() {
    let cfg = parse_config(&fixture("p1.json")).unwrap();
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    run(Command::Sweep, &cfg, &Overrides::default(), dir).unwrap();
    let rec = record(dir);
    assert_eq!(rec.command, "sweep");
    assert_eq!(rec.csv_schema_version, 1);
    let names: Vec<&str> = rec.files.iter().map(|f| f.path.as_str()).collect();
    assert_eq!(names, ["sweep.csv", "hysteresis.json"]);
    assert!(verify_manifest(dir, &rec).unwrap().is_empty());
    fs::write(dir.join("sweep.csv"), "tampered\n").unwrap();
    assert_eq!(verify_manifest(dir, &rec).unwrap().len(), 1);
}

#[test]
fn overrides_are_recorded_and_applied() {
    let cfg = parse_config(&fixture("p1.json")).unwrap();
    let tmp = tempfile::tempdir().unwrap();
    let ov = Overrides { from: Some(3.0), to: Some(4.0), steps: Some(11), ..Default::default() };
    run(Command::Sweep, &cfg, &ov, tmp.path()).unwrap();
    let text = fs::read_to_string(tmp.path().join("sweep.csv")).unwrap();
    let values: Vec<f64> = text.lines().skip(1).map(|l| l.split(',').next().unwrap().parse().unwrap()).collect();
    let kappa = 2.0 * std::f64::consts::PI * 1e6;
    assert!((values[0] / kappa - 3.0).abs() < 1e-12);
    assert!((values.last().unwrap() / kappa - 4.0).abs() < 1e-12);
    assert_eq!(record(tmp.path()).overrides["steps"], 11);
}

#[test]
fn binary_exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let out = |name: &str| tmp.path().join(name);

    let ok = bin().args(["threshold", "--config"]).arg(fixture("p1.json")).arg("--out").arg(out("ok")).output().unwrap();
    assert_eq!(ok.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&ok.stdout).contains("eta_c/kappa"));

    // bare frequency key
    let bad = out("bad.json");
    let text = fs::read_to_string(fixture("p1.json")).unwrap().replace("\"kappa_hz\"", "\"kappa\"");
    fs::write(&bad, text).unwrap();
    let r = bin().args(["model", "--config"]).arg(&bad).arg("--out").arg(out("bad")).output().unwrap();
    assert_eq!(r.status.code(), Some(2));
    let err = String::from_utf8_lossy(&r.stderr);
    assert!(err.contains("kappa_hz"), "{err}");

    // negative length is a config error naming its path
    let neg = out("neg.json");
    let text = fs::read_to_string(fixture("p1.json")).unwrap().replace("\"cavity_length\": 1.0e-4", "\"cavity_length\": -1.0e-4");
    fs::write(&neg, text).unwrap();
    let r = bin().args(["model", "--config"]).arg(&neg).arg("--out").arg(out("neg")).output().unwrap();
    assert_eq!(r.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&r.stderr).contains("physical.cavity_length"));

    // above the window the single branch is Hopf-unstable: numerical failure
    let r = bin()
        .args(["spectrum", "--eta-over-kappa", "7", "--config"])
        .arg(fixture("p1.json"))
        .arg("--out")
        .arg(out("unstable"))
        .output()
        .unwrap();
    assert_eq!(r.status.code(), Some(3), "{}", String::from_utf8_lossy(&r.stderr));

    // regime failure only matters with --strict
    let loose = out("loose.json");
    let text = fs::read_to_string(fixture("p1.json")).unwrap().replace("\"kf_over_k\": 12.5", "\"kf_over_k\": 0.8");
    fs::write(&loose, text).unwrap();
    let r = bin().args(["model", "--config"]).arg(&loose).arg("--out").arg(out("loose")).output().unwrap();
    assert_eq!(r.status.code(), Some(0));
    let r = bin().args(["model", "--strict", "--config"]).arg(&loose).arg("--out").arg(out("strict")).output().unwrap();
    assert_eq!(r.status.code(), Some(4));
    assert!(out("strict").join(RECORD_FILE).exists());
}

#[test]
fn edcheck_passes_and_reports() {
    let cfg = parse_config(&fixture("ed.json")).unwrap();
    let tmp = tempfile::tempdir().unwrap();
    let out = run(Command::Edcheck, &cfg, &Overrides::default(), tmp.path()).unwrap();
    assert_eq!(out.verdict, Verdict::Ok, "{}", out.summary);
    assert!(out.summary.contains("PASS"));
    let v: serde_json::Value = serde_json::from_slice(&fs::read(tmp.path().join("edcheck.json")).unwrap()).unwrap();
    assert!(v["checks"].as_array().unwrap().iter().all(|c| c["pass"] == true));
    assert_eq!(v["spectrum"].as_array().unwrap().len(), 3);
}

#[test]
fn meanfield_mode_writes_photon_number() {
    let mut cfg = parse_config(&fixture("p1.json")).unwrap();
    let sim = cfg.simulate.as_mut().unwrap();
    sim.mode = fermimirror_cli::config::SimMode::Meanfield;
    sim.segments = None;
    sim.perturbation = 1e-3;
    let tmp = tempfile::tempdir().unwrap();
    run(Command::Simulate, &cfg, &Overrides::default(), tmp.path()).unwrap();
    let path = tmp.path().join("trajectory.csv");
    assert_eq!(first_line(&path), csv::MEANFIELD_TRAJECTORY_HEADER);
    let text = fs::read_to_string(&path).unwrap();
    let last: Vec<f64> = text.lines().last().unwrap().split(',').map(|s| s.parse().unwrap()).collect();
    assert!((last[5] - (last[3] * last[3] + last[4] * last[4])).abs() < 1e-12 * last[5]);
    assert!(record(tmp.path()).rng.is_none());
}
