use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn beyondq(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_beyondq")).args(args).output().expect("binary runs")
}

fn manifests_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../manifests")
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path.to_string_lossy().into_owned()
}

#[test]
fn list_covers_every_kind_with_a_reference() {
    let out = beyondq(&["list", "--json"]);
    assert!(out.status.success());
    let catalog: Vec<Value> = serde_json::from_slice(&out.stdout).unwrap();
    let kinds: Vec<&str> = catalog.iter().map(|e| e["kind"].as_str().unwrap()).collect();
    assert_eq!(
        kinds,
        ["relax", "subq", "distinguish", "signal", "hv-singlet", "hv-photon", "csl-run", "csl-master", "sl-hits", "gambler", "predict"]
    );
    for e in &catalog {
        assert!(!e["reference"].as_str().unwrap().is_empty());
        assert!(!e["description"].as_str().unwrap().is_empty());
    }
    assert_eq!(beyondq(&["list", "--json"]).stdout, out.stdout);
    assert!(beyondq(&["list"]).status.success());
}

#[test]
fn shipped_manifests_validate() {
    let mut seen = 0;
    for entry in std::fs::read_dir(manifests_dir()).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "toml") {
            let out = beyondq(&["validate", path.to_str().unwrap()]);
            assert!(out.status.success(), "{}: {}", path.display(), String::from_utf8_lossy(&out.stderr));
            seen += 1;
        }
    }
    assert!(seen >= 11);
}

#[test]
fn schema_errors_name_the_field_and_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let no_seed = write(dir.path(), "a.toml", "kind = \"gambler\"\n[params]\nx0 = 0.5\nstake = 0.01\nruns = 10\n");
    let out = beyondq(&["validate", &no_seed]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("seed"));

    let negative = write(
        dir.path(),
        "b.toml",
        "kind = \"csl-run\"\nseed = 1\n[params]\nspectrum = [0.5, -0.5]\namplitudes = [0.6, 0.8]\nlambda = \"-1 nat\"\nt_end = \"1 nat\"\nruns = 10\n",
    );
    let stderr = String::from_utf8_lossy(&beyondq(&["validate", &negative]).stderr).into_owned();
    assert!(stderr.contains("params.lambda") && stderr.contains("non-negative"), "{stderr}");

    let unitless = write(dir.path(), "c.toml", "kind = \"predict\"\nseed = 1\n[params]\nradius = 1e-7\n");
    let out = beyondq(&["validate", &unitless]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("params.radius"));
}

#[test]
fn io_failures_exit_1() {
    let out = beyondq(&["validate", "/nonexistent/manifest.toml"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn numerical_failures_exit_3() {
    let dir = tempfile::tempdir().unwrap();
    // Too few samples to survive the failure budget on a coarse grid.
    let path = write(
        dir.path(),
        "s.toml",
        "kind = \"signal\"\nseed = 6\n[params]\ninitial = \"shifted-b\"\nshift = \"0.5 nat\"\nquench = \"mass\"\nmass_b = \"0.5 nat\"\nsamples = 300\ngrid_points = 32\n",
    );
    let out_dir = dir.path().join("out");
    let out = beyondq(&["run", &path, "--out", out_dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn gambler_run_is_reproducible_and_fair() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = manifests_dir().join("gambler.toml");
    let run = |sub: &str, extra: &[&str]| {
        let out_dir = dir.path().join(sub);
        let mut args = vec!["run", manifest.to_str().unwrap(), "--out", out_dir.to_str().unwrap()];
        args.extend_from_slice(extra);
        let out = beyondq(&args);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        let record: Value = serde_json::from_slice(&std::fs::read(out_dir.join("record.json")).unwrap()).unwrap();
        record
    };
    let a = run("a", &[]);
    let b = run("b", &["--threads", "1"]);
    assert_eq!(a["outputs"], b["outputs"]);
    assert_eq!(a["seed"], 7);

    let summary: Value = serde_json::from_slice(&std::fs::read(dir.path().join("a/summary.json")).unwrap()).unwrap();
    assert_eq!(summary["schema_version"], 1);
    let s = &summary["summary"];
    let (freq, sigma) = (s["win_frequency"].as_f64().unwrap(), s["sigma"].as_f64().unwrap());
    assert!((freq - 0.5).abs() < 3.0 * sigma, "{freq} ± {sigma}");

    let c = run("c", &["--seed", "8"]);
    assert_eq!(c["seed"], 8);
    assert_ne!(a["outputs"], c["outputs"]);
}
