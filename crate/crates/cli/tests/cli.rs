use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn example(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("examples").join(name)
}

fn run(args: &[&str], config: &Path, out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_vlc-orient"))
        .args(args)
        .arg("--config")
        .arg(config)
        .arg("--out")
        .arg(out)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str], config: &Path, out: &Path) {
    let o = run(args, config, out);
    assert!(
        o.status.success(),
        "{args:?}: {}",
        String::from_utf8_lossy(&o.stderr)
    );
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn csv(path: &Path) -> (String, Vec<Vec<f64>>) {
    let text = std::fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    let header = lines.next().unwrap().to_string();
    let rows = lines
        .map(|l| l.split(',').map(|v| v.parse().unwrap()).collect())
        .collect();
    (header, rows)
}

fn write_config(dir: &Path, text: &str) -> PathBuf {
    let p = dir.join("config.json");
    std::fs::write(&p, text).unwrap();
    p
}

#[test]
fn pdf_of_random_location_reports_the_atom() {
    let dir = tempfile::tempdir().unwrap();
    ok(&["pdf"], &example("single_random_uniform.json"), dir.path());
    let (header, rows) = csv(&dir.path().join("pdf.csv"));
    assert_eq!(header, "x,pdf");
    assert_eq!(rows.len(), 400);
    assert!(rows.iter().all(|r| r[1] >= 0.0 && r[1].is_finite()));
    let m = json(&dir.path().join("pdf.manifest.json"));
    assert_eq!(m["atom_mass"], 0.25);
    assert_eq!(m["command"], "pdf");
    assert!(!m["models"].as_array().unwrap().is_empty());
    let bytes = std::fs::read(dir.path().join("pdf.csv")).unwrap();
    let digest: String = sha2_hex(&bytes);
    assert_eq!(m["artifacts"][0]["sha256"], digest);
}

fn sha2_hex(bytes: &[u8]) -> String {
    use sha2::{Digest, Sha256};
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

#[test]
fn cdf_starts_at_the_atom_and_ends_at_one() {
    let dir = tempfile::tempdir().unwrap();
    ok(&["cdf", "--grid-points", "33"], &example("single_fixed_uniform.json"), dir.path());
    let (header, rows) = csv(&dir.path().join("cdf.csv"));
    assert_eq!(header, "x,cdf");
    assert_eq!(rows.len(), 33);
    assert_eq!(rows[0], vec![0.0, 0.25]);
    assert!((rows[32][1] - 1.0).abs() < 1e-12);
    assert!(rows.windows(2).all(|w| w[1][1] >= w[0][1]));
    assert_eq!(json(&dir.path().join("cdf.manifest.json"))["grid_points"], 33);
}

#[test]
fn narrow_fov_ber_floors_at_half_the_atom() {
    let dir = tempfile::tempdir().unwrap();
    ok(&["ber"], &example("single_fixed_uniform.json"), dir.path());
    let (header, rows) = csv(&dir.path().join("ber.csv"));
    assert_eq!(header, "snr_db,ber");
    assert_eq!(rows.len(), 31);
    let last = rows.last().unwrap();
    assert_eq!(last[0], 150.0);
    assert!((0.124..=0.126).contains(&last[1]), "{}", last[1]);
}

#[test]
fn outage_uses_configured_thresholds() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        r#"{"scenario":"single_fixed",
            "geometry":{"ell":3,"d":2.5,"fov":35,"half_power":60,"area_cm2":1,"g":1},
            "theta_dist":{"kind":"uniform","lo":20,"hi":40},
            "metrics":{"thresholds":[0, 1e-13, 1e-9]},
            "output":{"prefix":"run1_"}}"#,
    );
    ok(&["outage"], &cfg, dir.path());
    let (header, rows) = csv(&dir.path().join("run1_outage.csv"));
    assert_eq!(header, "threshold,outage");
    assert_eq!(rows[0], vec![0.0, 0.25]);
    assert_eq!(rows[2], vec![1e-9, 1.0]);
    assert!(dir.path().join("run1_outage.manifest.json").exists());
}

#[test]
fn mc_verify_passes_and_is_seeded() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = example("single_fixed_uniform.json");
    ok(&["mc-verify"], &cfg, &dir.path().join("a"));
    ok(&["mc-verify"], &cfg, &dir.path().join("b"));
    ok(&["mc-verify", "--seed", "7", "--samples", "200000"], &cfg, &dir.path().join("c"));
    let a = json(&dir.path().join("a/mc_verify.json"));
    assert_eq!(a["pass"], true);
    assert!(a["ks"].as_f64().unwrap() < 0.005);
    assert_eq!(a["atom_mass"], 0.25);
    assert!((a["zero_fraction"].as_f64().unwrap() - 0.25).abs() < 0.0013);
    let b = std::fs::read(dir.path().join("b/mc_verify.json")).unwrap();
    assert_eq!(std::fs::read(dir.path().join("a/mc_verify.json")).unwrap(), b);
    let c = json(&dir.path().join("c/mc_verify.json"));
    assert_eq!(c["seed"], 7);
    assert_eq!(c["samples"], 200000);
    assert_ne!(c["ks"], a["ks"]);
    let m = json(&dir.path().join("c/mc-verify.manifest.json"));
    assert_eq!(m["seed"], 7);
}

#[test]
fn regions_reproduce_the_four_led_table() {
    let dir = tempfile::tempdir().unwrap();
    ok(&["regions"], &example("array_midpoint.json"), dir.path());
    let r = json(&dir.path().join("regions.json"));
    let pair = |v: &Value| (v[0].as_u64().unwrap(), v[1].as_u64().unwrap());
    let joint: Vec<_> = r["joint"]
        .as_array()
        .unwrap()
        .iter()
        .map(|row| (pair(&row["compare"]), pair(&row["first"])))
        .collect();
    // (wide, narrow) per region
    assert_eq!(
        joint,
        vec![
            ((2, 1), (2, 1)),
            ((2, 3), (2, 1)),
            ((2, 3), (2, 3)),
            ((3, 2), (3, 2)),
            ((3, 2), (3, 4)),
            ((3, 4), (3, 4)),
        ]
    );
    let narrow: Vec<_> = r["partition"]["regions"]
        .as_array()
        .unwrap()
        .iter()
        .map(|x| (x["strongest"].as_u64().unwrap(), x["second"].as_u64().unwrap()))
        .collect();
    assert_eq!(narrow, vec![(2, 1), (2, 3), (3, 2), (3, 4)]);
    let (header, rows) = csv(&dir.path().join("gains.csv"));
    assert_eq!(header, "phi_deg,led1,led2,led3,led4");
    assert_eq!(rows.len(), 1601);
}

#[test]
fn same_config_gives_identical_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = example("two_led_fixed_gaussian.json");
    for sub in ["a", "b"] {
        ok(&["cdf", "--grid-points", "64"], &cfg, &dir.path().join(sub));
    }
    for f in ["cdf.csv", "cdf.manifest.json"] {
        let a = std::fs::read(dir.path().join("a").join(f)).unwrap();
        let b = std::fs::read(dir.path().join("b").join(f)).unwrap();
        assert_eq!(a, b, "{f}");
    }
}

#[test]
fn every_bundled_config_loads() {
    let dir = tempfile::tempdir().unwrap();
    for entry in std::fs::read_dir(example("")).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "json") {
            let text = std::fs::read_to_string(&path).unwrap();
            let cmd = if text.contains("multi_led") { "regions" } else { "cdf" };
            ok(&[cmd, "--grid-points", "16"], &path, dir.path());
        }
    }
}

fn code(args: &[&str], config: &Path, out: &Path) -> i32 {
    run(args, config, out).status.code().unwrap()
}

#[test]
fn config_problems_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    assert_eq!(code(&["pdf"], &dir.path().join("missing.json"), &out), 2);
    let cases = [
        "{ not json",
        // reversed uniform bounds
        r#"{"scenario":"single_fixed","geometry":{"ell":3,"d":2.5,"fov":35,"gamma":1,"area_cm2":1,"g":1},
            "theta_dist":{"kind":"uniform","lo":40,"hi":20}}"#,
        // no location law
        r#"{"scenario":"single_random","geometry":{"ell":3,"fov":35,"gamma":1,"area_cm2":1,"g":1},
            "theta_dist":{"kind":"uniform","lo":20,"hi":40}}"#,
        // wide mode while the FOV clips a quarter of the mass
        r#"{"scenario":"single_fixed","geometry":{"ell":3,"d":2.5,"fov":35,"gamma":1,"area_cm2":1,"g":1},
            "theta_dist":{"kind":"uniform","lo":20,"hi":40},"fov_mode":"wide"}"#,
        // SNR grid out of order
        r#"{"scenario":"single_fixed","geometry":{"ell":3,"d":2.5,"fov":35,"gamma":1,"area_cm2":1,"g":1},
            "theta_dist":{"kind":"uniform","lo":20,"hi":40},"metrics":{"snr_db":[10,5]}}"#,
        // both concentrator gain and refractive index
        r#"{"scenario":"single_fixed","geometry":{"ell":3,"d":2.5,"fov":35,"gamma":1,"area_cm2":1,"g":1,"n":1.5},
            "theta_dist":{"kind":"uniform","lo":20,"hi":40}}"#,
    ];
    for (k, text) in cases.iter().enumerate() {
        let cfg = write_config(dir.path(), text);
        let cmd = if k == 3 { "pdf" } else { "ber" };
        assert_eq!(code(&[cmd], &cfg, &out), 2, "case {k}");
    }
    assert_eq!(code(&["regions"], &example("single_fixed_uniform.json"), &out), 2);
    assert_eq!(code(&["pdf"], &example("array_midpoint.json"), &out), 2);
    assert_eq!(code(&["pdf", "--grid-points", "1"], &example("single_fixed_uniform.json"), &out), 2);
    assert_eq!(code(&["pdf", "--bogus"], &example("single_fixed_uniform.json"), &out), 2);
    let deterministic = write_config(
        dir.path(),
        r#"{"scenario":"single_fixed","geometry":{"ell":3,"d":2.5,"fov":35,"gamma":1,"area_cm2":1,"g":1},
            "theta_dist":{"kind":"point","value":30}}"#,
    );
    assert_eq!(code(&["pdf"], &deterministic, &out), 2);
    assert_eq!(code(&["ber"], &deterministic, &out), 0);
}
