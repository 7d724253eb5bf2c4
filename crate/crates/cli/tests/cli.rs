use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn epfrag(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_epfrag")).args(args).output().unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn write(dir: &TempDir, name: &str, text: &str) -> PathBuf {
    let path = dir.path().join(name);
    std::fs::write(&path, text).unwrap();
    path
}

fn simulated(dir: &TempDir, seed: u64) -> PathBuf {
    let path = dir.path().join(format!("sim{seed}.csv"));
    let out = epfrag(&["simulate", "--out", p(&path), "--seed", &seed.to_string()]);
    assert_eq!(out.status.code(), Some(0));
    path
}

const GLMM: &str = r#"
likelihood = "logistic"
response = "y"
fixed_effects = ["x1"]
group = "g"
"#;

#[test]
fn simulate_is_deterministic_and_well_formed() {
    let dir = TempDir::new().unwrap();
    let a = std::fs::read(simulated(&dir, 7)).unwrap();
    let again = dir.path().join("again.csv");
    epfrag(&["simulate", "--out", p(&again), "--seed", "7"]);
    assert_eq!(a, std::fs::read(&again).unwrap());

    let text = String::from_utf8(a).unwrap();
    assert!(text.starts_with("# "));
    assert!(text.contains("beta0=-0.5"));
    let rows: Vec<&str> = text.lines().filter(|l| !l.starts_with('#')).skip(1).collect();
    assert_eq!(rows.len(), 100);
    assert!(rows.iter().all(|r| r.ends_with(",0") || r.ends_with(",1")));
}

#[test]
fn fit_of_simulated_glmm_converges() {
    let dir = TempDir::new().unwrap();
    let data = simulated(&dir, 1);
    let model = write(&dir, "m.toml", GLMM);
    let out_path = dir.path().join("fit.json");
    let out = epfrag(&["fit", "--data", p(&data), "--model", p(&model), "--out", p(&out_path)]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let doc: Value = serde_json::from_str(&std::fs::read_to_string(&out_path).unwrap()).unwrap();
    assert_eq!(doc["converged"], Value::Bool(true));
    for key in ["iterations_used", "failure_count", "max_change_trace", "coefficients", "parameters", "densities"] {
        assert!(!doc[key].is_null(), "missing {key}");
    }
    let names: Vec<&str> = doc["coefficients"].as_array().unwrap().iter().map(|c| c["name"].as_str().unwrap()).collect();
    assert_eq!(names, ["(intercept)", "x1"]);
    for par in doc["parameters"].as_array().unwrap() {
        for key in ["name", "family", "natural", "common"] {
            assert!(!par[key].is_null(), "{par}");
        }
    }
}

#[test]
fn fit_output_is_reproducible_with_17_digits() {
    let dir = TempDir::new().unwrap();
    let data = simulated(&dir, 2);
    let model = write(&dir, "m.toml", GLMM);
    let (a, b) = (dir.path().join("a.json"), dir.path().join("b.json"));
    for out in [&a, &b] {
        epfrag(&["fit", "--data", p(&data), "--model", p(&model), "--out", p(out), "--schedule", "sequential"]);
    }
    let text = std::fs::read_to_string(&a).unwrap();
    assert_eq!(text, std::fs::read_to_string(&b).unwrap());
    let trace = text.split("\"max_change_trace\": [").nth(1).unwrap();
    let first = trace.trim_start().split([',', '\n']).next().unwrap().trim();
    let mantissa = first.split('e').next().unwrap().trim_start_matches('-');
    assert_eq!(mantissa.chars().filter(char::is_ascii_digit).count(), 17, "{first}");
}

#[test]
fn one_iteration_is_not_convergence() {
    let dir = TempDir::new().unwrap();
    let data = simulated(&dir, 3);
    let model = write(&dir, "m.toml", GLMM);
    let out = epfrag(&["fit", "--data", p(&data), "--model", p(&model), "--max-iter", "1", "--out", p(&dir.path().join("f.json"))]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn missing_response_column_is_named() {
    let dir = TempDir::new().unwrap();
    let data = simulated(&dir, 4);
    let model = write(&dir, "m.toml", &GLMM.replace("response = \"y\"", "response = \"outcome\""));
    let out = epfrag(&["fit", "--data", p(&data), "--model", p(&model)]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("outcome"));
}

#[test]
fn malformed_config_names_the_field() {
    let dir = TempDir::new().unwrap();
    let data = simulated(&dir, 5);
    let model = write(&dir, "m.toml", &format!("{GLMM}\n[ep]\nepsilon = \"high\"\n"));
    let out = epfrag(&["fit", "--data", p(&data), "--model", p(&model)]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("epsilon"));

    let model = write(&dir, "m2.toml", &format!("{GLMM}\nknots = 4\n"));
    let out = epfrag(&["fit", "--data", p(&data), "--model", p(&model)]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("knots"));
}

#[test]
fn bad_data_value_is_located() {
    let dir = TempDir::new().unwrap();
    let data = write(&dir, "d.csv", "y,x1,g\n1,0.5,0\n0,abc,1\n");
    let model = write(&dir, "m.toml", GLMM);
    let out = epfrag(&["fit", "--data", p(&data), "--model", p(&model)]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("x1") && err.contains("row 2"), "{err}");
}

fn conjugate_data(dir: &TempDir) -> PathBuf {
    let rows: String = (0..30).map(|i| format!("{}\n", 1.0 + ((i * 37) % 11) as f64 / 5.0 - 1.0)).collect();
    write(dir, "conj.csv", &format!("y\n{rows}"))
}

#[test]
fn accuracy_on_the_conjugate_model_is_near_perfect() {
    let dir = TempDir::new().unwrap();
    let data = conjugate_data(&dir);
    let model = write(
        &dir,
        "conj.toml",
        "likelihood = \"gaussian\"\nresponse = \"y\"\n[priors]\nsigma_beta = 4.0\nknown_variance = 1.5\n",
    );
    let out = epfrag(&["accuracy", "--data", p(&data), "--model", p(&model)]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let doc: Value = serde_json::from_slice(&out.stdout).unwrap();
    let acc = doc["parameters"][0]["accuracy"].as_f64().unwrap();
    assert!(acc >= 99.9, "{acc}");
}

#[test]
fn accuracy_rejects_larger_models() {
    let dir = TempDir::new().unwrap();
    let data = simulated(&dir, 6);
    let model = write(&dir, "m.toml", GLMM);
    let out = epfrag(&["accuracy", "--data", p(&data), "--model", p(&model)]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("free parameters"));
}

#[test]
fn quadcheck_passes_the_battery() {
    let out = epfrag(&["quadcheck"]);
    assert_eq!(out.status.code(), Some(0));
    let doc: Value = serde_json::from_slice(&out.stdout).unwrap();
    for fam in ["A", "B", "C_logistic", "C_poisson"] {
        assert!(doc["max_rel_error"][fam].as_f64().unwrap() < 1e-6);
    }
}
