use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_gmn-forge"))
}

fn run(dir: &Path, args: &[&str]) -> Output {
    bin().current_dir(dir).args(args).output().unwrap()
}

fn json(o: &Output) -> Value {
    serde_json::from_slice(&o.stdout).unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&o.stdout)))
}

fn setup() -> TempDir {
    let d = TempDir::new().unwrap();
    let files = [
        ("lattice.json", r#"{"pairing": [[0,2,0,0],[-2,0,0,0],[0,0,0,3],[0,0,-3,0]]}"#),
        ("plane.json", "[[0,1],[-1,0]]"),
        ("malformed.json", "{\"pairing\": [[0,1],\n  [-1,0,]]}"),
        ("ov.json", r#"{"kind":"multi_ov","m":[[0,0]],"y":[0]}"#),
        ("i2.json", r#"{"kind":"multi_ov","m":[[0.3,0.2],[0.3,0.2],[-0.5,0.1],[-0.1,-0.5]],"y":[0.15,0.3,0.25,0.3]}"#),
        ("mass_sum.json", r#"{"kind":"multi_ov","m":[[0.3,0],[0.2,0]],"y":[0.5,0.5]}"#),
        ("divisors.json", r#"{"kind":"general","r":2,"p":[2,3],"lights":[{"c":[2,3],"z0":[0,0],"theta0":0}],
            "tau_tilde":{"constant":[[[0,1],[0,0]],[[0,0],[0,1]]]},"domain":{"center":[[0,0],[0,0]],"radii":[1,1]}}"#),
        ("run.json", r#"{"model":"ov.json","seed":2,"points":4,"tn_points":2}"#),
        ("strict.json", r#"{"model":"ov.json","points":3,"tn_points":0,"tolerances":{"reality":-1}}"#),
    ];
    for (name, text) in files {
        std::fs::write(d.path().join(name), text).unwrap();
    }
    d
}

#[test]
fn frobenius_reports_divisors() {
    let d = setup();
    let o = run(d.path(), &["frobenius", "lattice.json", "--out", "res"]);
    assert_eq!(o.status.code(), Some(0));
    let v = json(&o);
    assert_eq!(v["divisors"], serde_json::json!([1, 6]));
    assert_eq!(v["dual_divisors"], serde_json::json!(["1", "1/6"]));
    assert_eq!(v["valid"], Value::Bool(true));
    assert!(d.path().join("res/frobenius.json").exists());
    let v = json(&run(d.path(), &["frobenius", "plane.json"]));
    assert_eq!(v["divisors"], serde_json::json!([1]));
}

#[test]
fn malformed_input_names_the_line() {
    let d = setup();
    let o = run(d.path(), &["frobenius", "malformed.json"]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("line 2"), "{err}");
    assert!(err.contains("[-1,0,]]"), "{err}");
    let o = run(d.path(), &["frobenius", "missing.json"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn invalid_models_exit_two_naming_the_assumption() {
    let d = setup();
    let o = run(d.path(), &["check-data", "--model", "mass_sum.json"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("sum of m"));
    let o = run(d.path(), &["verify", "--model", "divisors.json"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("A1"));
    std::fs::write(d.path().join("unknown.json"), r#"{"kind":"multi_ov","m":[[0,0]],"y":[0],"q":1}"#).unwrap();
    let o = run(d.path(), &["check-data", "--model", "unknown.json"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("unknown field"));
}

#[test]
fn check_data_passes_on_ov() {
    let d = setup();
    let o = run(d.path(), &["check-data", "--model", "ov.json"]);
    assert_eq!(o.status.code(), Some(0));
    let v = json(&o);
    assert_eq!(v["passed"], Value::Bool(true));
    assert!(v["a6_margin"].as_f64().unwrap() > 0.0);
}

#[test]
fn region_reports_root_and_annulus() {
    let d = setup();
    let o = run(d.path(), &["region", "--model", "ov.json"]);
    assert_eq!(o.status.code(), Some(0));
    let v = json(&o);
    let r0 = v["r0"].as_f64().unwrap();
    assert!((0.41..=0.43).contains(&r0));
    assert!(v["root_gap"].as_f64().unwrap() < 1e-10);
    let pi = std::f64::consts::PI;
    assert_eq!(v["half_pi_annulus"], serde_json::json!([pi - 1.0, pi]));
    assert_eq!(v["annulus"][1].as_f64().unwrap(), pi);
    assert!(v["shell_margin"].as_f64().unwrap() > 0.0);
}

#[test]
fn eval_is_deterministic_and_guards_zeta_zero() {
    let d = setup();
    let args = ["eval", "--model", "i2.json", "--zeta", "0.5,1+2i", "--grid", "polar:0.6:2.5:3,0.1:6.3:4"];
    let a = run(d.path(), &[&args[..], &["--jobs", "4"]].concat());
    let b = run(d.path(), &[&args[..], &["--jobs", "1"]].concat());
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
    let text = String::from_utf8(a.stdout).unwrap();
    let lines: Vec<&str> = text.split("\r\n").filter(|l| !l.is_empty()).collect();
    assert_eq!(lines.len(), 1 + 3 * 4 * 2);
    let header: Vec<&str> = lines[0].split(',').collect();
    assert_eq!(header.len(), 8 + 1 + 4 + 12);
    assert!(lines[1..].iter().all(|l| l.split(',').nth(7) == Some("ok")));

    let o = run(d.path(), &["eval", "--model", "ov.json", "--zeta", "0,1"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("zeta = 0"));
    let o = run(d.path(), &["eval", "--model", "ov.json", "--zeta", "0,1", "--form", "omega-plus", "--out", "ev"]);
    assert_eq!(o.status.code(), Some(0));
    let csv = std::fs::read_to_string(d.path().join("ev/eval.csv")).unwrap();
    let rows: Vec<Vec<&str>> = csv.split("\r\n").filter(|l| !l.is_empty()).skip(1).map(|l| l.split(',').collect()).collect();
    // omega_+ does not depend on zeta
    for pair in rows.chunks(2) {
        assert_eq!(pair[0][8..], pair[1][8..]);
    }
}

#[test]
fn verify_exit_codes_and_bundle() {
    let d = setup();
    let o = run(d.path(), &["verify", "--model", "run.json", "--out", "cert", "--jobs", "2"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stdout));
    let v = json(&o);
    assert_eq!(v["passed"], Value::Bool(true));
    assert_eq!(v["seed"], 2);
    let names: Vec<&str> = v["certificates"].as_array().unwrap().iter().map(|c| c["name"].as_str().unwrap()).collect();
    let mut sorted = names.clone();
    sorted.sort();
    assert_eq!(names, sorted);
    for n in ["control.flipped_v_eigenvalue", "control.mass_sum_nonzero", "control.ray_collision", "model.rh.jump", "semi_flat.twistor.closedness"] {
        assert!(names.contains(&n), "{n}");
    }
    let saved = std::fs::read(d.path().join("cert/certificates.json")).unwrap();
    let again = run(d.path(), &["verify", "--model", "run.json", "--jobs", "3"]);
    assert_eq!(again.stdout, saved);

    let o = run(d.path(), &["verify", "--model", "strict.json", "--family", "semi-flat"]);
    assert_eq!(o.status.code(), Some(1));
    assert_eq!(json(&o)["passed"], Value::Bool(false));
    let o = run(d.path(), &["verify", "--model", "ov.json", "--zeta", "0"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn export_writes_plot_data() {
    let d = setup();
    let o = run(d.path(), &["export", "--model", "ov.json", "--out", "plots"]);
    assert_eq!(o.status.code(), Some(0));
    let f = std::fs::read_to_string(d.path().join("plots/f_curve.csv")).unwrap();
    assert!(f.starts_with("r,f\r\n"));
    let tn = std::fs::read_to_string(d.path().join("plots/tn_profile.csv")).unwrap();
    let diffs: Vec<f64> = tn.split("\r\n").skip(1).filter(|l| !l.is_empty()).map(|l| l.split(',').nth(1).unwrap().parse().unwrap()).collect();
    assert!(diffs.windows(2).all(|w| w[1] <= 2.0 * w[0]));
    let tf: Value = serde_json::from_str(&std::fs::read_to_string(d.path().join("plots/twoform.json")).unwrap()).unwrap();
    assert_eq!(tf["frame"].as_array().unwrap().len(), 4);
    assert_eq!(run(d.path(), &["export", "--model", "ov.json"]).status.code(), Some(2));
}
