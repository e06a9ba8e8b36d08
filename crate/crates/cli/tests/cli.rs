use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use sha2::{Digest, Sha256};

use semiper_cli::config::ExperimentConfig;

fn configs_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("semiper-cli-{}-{name}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn semiper(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_semiper")).args(args).output().expect("binary runs")
}

fn run_config(config: &Path, out: &Path, extra: &[&str]) -> Output {
    let mut args = vec!["run", "--config", config.to_str().unwrap(), "--out", out.to_str().unwrap()];
    args.extend_from_slice(extra);
    semiper(&args)
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn write_config(dir: &Path, value: &Value) -> PathBuf {
    let path = dir.join("config.json");
    std::fs::write(&path, serde_json::to_string_pretty(value).unwrap()).unwrap();
    path
}

fn small_random_config() -> Value {
    serde_json::json!({
        "name": "random_small",
        "seed": 11,
        "runs": [{
            "label": "interval",
            "model": { "kind": "damped_wave_interval", "n": 16, "damping": { "kind": "constant", "amplitude": 1.0 } },
            "forcing": { "period": 1.0, "components": [{ "shape": { "kind": "bump", "p": 2 }, "profile": { "kind": "random" } }] },
            "experiments": [
                { "kind": "convergence", "starts": 2, "n_periods": 10, "window": [5, 10] },
                { "kind": "gain", "k_max": 2 },
                { "kind": "decay_envelope", "alpha": 1.0, "grid": { "kind": "geometric", "start": 0.5, "end": 20.0, "points": 30 } }
            ]
        }]
    })
}

fn csv_files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in std::fs::read_dir(&d).unwrap() {
            let p = entry.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else if p.extension().is_some_and(|e| e == "csv") {
                out.push((p.strip_prefix(dir).unwrap().display().to_string(), std::fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}

#[test]
fn shipped_configs_parse_and_validate() {
    let mut names = Vec::new();
    for entry in std::fs::read_dir(configs_dir()).unwrap() {
        let path = entry.unwrap().path();
        let name = path.file_name().unwrap().to_string_lossy().to_string();
        if name == "schema.json" || !name.ends_with(".json") {
            continue;
        }
        let cfg: ExperimentConfig = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap_or_else(|e| panic!("{name}: {e}"));
        cfg.validate().unwrap_or_else(|e| panic!("{name}: {e}"));
        names.push(name);
    }
    for id in 1..=12 {
        let prefix = format!("c{id:02}_");
        assert!(names.iter().any(|n| n.starts_with(&prefix)), "no config for criterion {id}");
    }
    let schema = read_json(&configs_dir().join("schema.json"));
    assert_eq!(schema["title"], "semiper experiment config");
}

#[test]
fn scalar_demo_periodic_state_is_one() {
    let out = scratch("scalar");
    let res = run_config(&configs_dir().join("scalar_demo.json"), &out, &[]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    let report = read_json(&out.join("scalar/periodic_report.json"));
    for method in ["series", "direct", "harmonic_balance"] {
        let w0 = &report["reports"][method]["w0"];
        let (re, im) = (w0["re"][0].as_f64().unwrap(), w0["im"][0].as_f64().unwrap());
        assert!((re - 1.0).abs() <= 1e-12 && im.abs() <= 1e-12, "{method}: {re} + {im}i");
    }
    assert!(report["relative_residual"].as_f64().unwrap() <= 1e-12);
}

#[test]
fn resonance_demo_grows_linearly() {
    let out = scratch("resonance");
    let res = run_config(&configs_dir().join("resonance_demo.json"), &out, &[]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    let growth = read_json(&out.join("sphere_j10/growth.json"));
    let c_j = growth["c_j"].as_f64().unwrap();
    let csv = std::fs::read_to_string(out.join("sphere_j10/growth.csv")).unwrap();
    let table = semiper::io::Table::from_csv(&csv).unwrap();
    let last = table.rows.last().unwrap();
    let (n, norm) = (last[0], last[1]);
    assert_eq!(n, 200.0);
    assert!(norm >= 0.8 * c_j * n, "final norm {norm} vs 0.8 C_j n = {}", 0.8 * c_j * n);
    let script = std::fs::read_to_string(out.join("sphere_j10/growth.gp")).unwrap();
    assert!(script.contains("growth.csv") && script.contains("lower_bound"));
}

#[test]
fn repeated_runs_are_byte_identical() {
    let dir = scratch("determinism");
    let config = write_config(&dir, &small_random_config());
    let (a, b, c) = (dir.join("a"), dir.join("b"), dir.join("c"));
    for out in [&a, &b] {
        let res = run_config(&config, out, &["--threads", "1"]);
        assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    }
    let res = run_config(&config, &c, &["--seed", "12"]);
    assert!(res.status.success());
    let (fa, fb, fc) = (csv_files(&a), csv_files(&b), csv_files(&c));
    assert_eq!(fa.len(), 3);
    assert_eq!(fa, fb);
    assert_ne!(fa, fc, "a different seed should change the random profile");
}

#[test]
fn manifest_hashes_match_emitted_files() {
    let dir = scratch("manifest");
    let config = write_config(&dir, &small_random_config());
    let out = dir.join("out");
    assert!(run_config(&config, &out, &[]).status.success());
    let manifest = read_json(&out.join("manifest.json"));
    let config_hash = format!("{:x}", Sha256::digest(std::fs::read(&config).unwrap()));
    assert_eq!(manifest["config_sha256"].as_str().unwrap(), config_hash);
    assert_eq!(manifest["versions"]["semiper"].as_str().unwrap(), env!("CARGO_PKG_VERSION"));
    let files = manifest["files"].as_array().unwrap();
    assert!(files.iter().any(|f| f["path"].as_str().unwrap().ends_with("decay_envelope.gp")));
    for f in files {
        let bytes = std::fs::read(out.join(f["path"].as_str().unwrap())).unwrap();
        assert_eq!(f["bytes"].as_u64().unwrap(), bytes.len() as u64);
        assert_eq!(f["sha256"].as_str().unwrap(), format!("{:x}", Sha256::digest(&bytes)));
    }
    let stages: Vec<&str> = manifest["stages"].as_array().unwrap().iter().map(|s| s["stage"].as_str().unwrap()).collect();
    assert_eq!(stages, ["build", "convergence", "gain", "decay_envelope"]);
}

fn stderr_of(res: &Output) -> String {
    String::from_utf8_lossy(&res.stderr).to_string()
}

#[test]
fn malformed_config_exits_with_two() {
    let dir = scratch("invalid");
    let mut cfg = small_random_config();
    cfg["runs"][0]["forcing"]["period"] = serde_json::json!(-1.0);
    let res = run_config(&write_config(&dir, &cfg), &dir.join("out"), &[]);
    assert_eq!(res.status.code(), Some(2));
    assert!(stderr_of(&res).contains("cli::InvalidConfig"), "{}", stderr_of(&res));

    cfg = small_random_config();
    cfg["runs"][0]["unexpected"] = serde_json::json!(1);
    let res = run_config(&write_config(&dir, &cfg), &dir.join("out"), &[]);
    assert_eq!(res.status.code(), Some(2));
    assert!(stderr_of(&res).contains("cli::InvalidConfig"));

    let res = run_config(&dir.join("missing.json"), &dir.join("out"), &[]);
    assert_eq!(res.status.code(), Some(2));
}

#[test]
fn library_validation_error_exits_with_two() {
    let dir = scratch("core_invalid");
    let mut cfg = small_random_config();
    cfg["runs"][0]["model"]["damping"] = serde_json::json!({ "kind": "constant", "amplitude": -1.0 });
    let res = run_config(&write_config(&dir, &cfg), &dir.join("out"), &[]);
    assert_eq!(res.status.code(), Some(2), "{}", stderr_of(&res));
    assert!(stderr_of(&res).contains("models::"), "{}", stderr_of(&res));
}

#[test]
fn solver_error_exits_with_three() {
    let out = scratch("obstruction");
    let res = run_config(&configs_dir().join("c04_kernel_obstruction.json"), &out, &[]);
    assert_eq!(res.status.code(), Some(3));
    assert!(stderr_of(&res).contains("periodic_solver::KernelObstruction"), "{}", stderr_of(&res));
}
