use std::path::Path;
use std::process::{Command, Output};

fn biars(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_biars"))
        .args(args)
        .env_remove("BIARS_OUTPUT_DIR")
        .output()
        .expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

const SMALL: &[&str] = &[
    "--set",
    "scenario.users=6",
    "--set",
    "experiment.snr.values=[10,20]",
    "--set",
    "experiment.snr.schemes=[\"bia-rs-opt\",\"baseline1\",\"noma\"]",
    "--drops",
    "2",
    "--only",
    "snr",
];

fn run_small(out: &Path, extra: &[&str]) -> Output {
    let mut args = vec!["run", "--out", out.to_str().unwrap()];
    args.extend_from_slice(SMALL);
    args.extend_from_slice(extra);
    biars(&args)
}

#[test]
fn default_config_is_valid() {
    let o = biars(&["validate"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(String::from_utf8_lossy(&o.stdout).contains("16 APs"));
}

#[test]
fn eye_safety_violation_rejected() {
    let o = biars(&["validate", "--set", "scenario.vcsel.power=1.0"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("scenario.vcsel.power"));
    assert!(stderr(&o).contains("eye-safety"));
}

#[test]
fn fewer_photodiodes_than_aps_rejected() {
    let o = biars(&["validate", "--set", "scenario.receiver.photodiodes=4"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("scenario.receiver.photodiodes"));
}

#[test]
fn unknown_keys_and_bad_specs_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("bad.toml");
    std::fs::write(&p, "[grouping]\nradius = 3\n").unwrap();
    let o = biars(&["validate", p.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));

    let o = biars(&["validate", "--set", "experiment.snr.values=[20,10]"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("experiment.snr.values"));

    let o = biars(&["validate", "--set", "experiment.ber.axis=\"users\""]);
    assert_eq!(o.status.code(), Some(2));

    let o = biars(&["validate", "--set", "grouping.groups=5"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("block"));
}

#[test]
fn toml_file_with_partial_sections() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("run.toml");
    std::fs::write(&p, "seed = 7\n[scenario]\nusers = 12\n[experiment.snr]\nvalues = [5.0, 15.0]\n").unwrap();
    let o = biars(&["validate", p.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(String::from_utf8_lossy(&o.stdout).contains("12 users"));
}

#[test]
fn run_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    let o = run_small(&a, &[]);
    assert!(o.status.success(), "{}", stderr(&o));
    for f in ["snr.csv", "snr.json", "scenario.json", "manifest.json"] {
        assert!(a.join(f).exists(), "{f} missing");
    }
    let o = run_small(&b, &["--threads", "1"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = std::fs::read(a.join("snr.csv")).unwrap();
    assert_eq!(csv, std::fs::read(b.join("snr.csv")).unwrap());
    assert!(String::from_utf8_lossy(&csv).starts_with("scheme,axis,metric,mean,stderr,drops\n"));

    let manifest = std::fs::read_to_string(a.join("manifest.json")).unwrap();
    assert!(manifest.contains("experiment.snr.values=[10,20]"));
    let m: serde_json::Value = serde_json::from_str(&manifest).unwrap();
    assert_eq!(m["config"]["experiment"]["snr"]["values"], serde_json::json!([10.0, 20.0]));
    assert_eq!(m["config_hash"].as_str().unwrap().len(), 64);

    let c = dir.path().join("c");
    let o = biars(&["run", a.join("manifest.json").to_str().unwrap(), "--out", c.to_str().unwrap(), "--only", "snr"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(csv, std::fs::read(c.join("snr.csv")).unwrap());
}

#[test]
fn output_dir_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let mut args = vec!["run"];
    args.extend_from_slice(SMALL);
    let o = Command::new(env!("CARGO_BIN_EXE_biars"))
        .args(&args)
        .env("BIARS_OUTPUT_DIR", dir.path())
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(dir.path().join("snr.csv").exists());
}

#[test]
fn infeasible_qos_exit_code() {
    let dir = tempfile::tempdir().unwrap();
    let o = run_small(
        dir.path(),
        &[
            "--set",
            "grouping.groups=2",
            "--set",
            "optimizer.qos={ kind = \"absolute\", rates = [1000.0, 1000.0] }",
        ],
    );
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    assert!(stderr(&o).contains("group"));
}

#[test]
fn dump_block_toy() {
    let o = biars(&["dump-block", "--aps", "2", "--groups", "2"]);
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["slots"], 3);
    let o = biars(&["dump-block", "--aps", "16", "--groups", "5"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn trace_prints_csv() {
    let o = biars(&[
        "trace",
        "--set",
        "experiment.convergence.values=[0,1,2,3]",
        "--set",
        "experiment.convergence.drops=1",
        "--set",
        "scenario.users=6",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let out = String::from_utf8_lossy(&o.stdout);
    assert!(out.starts_with("scheme,axis,metric,mean,stderr,drops\n"));
    assert!(out.contains("bia-rs-subopt,3.0,sum_rate"));
}
