use parentgap::config::{validate, ExperimentConfig, InitMode};
use parentgap::model::Model;
use parentgap::run::{self, csv_body, read_csv, RunOptions, RunOutput, RunRecord};
use parentgap::Error;
use std::path::Path;
use std::process::Command;

const AKLT: &str = r#"
model = "aklt"
n_sites = 6
template = true

[lambda]
start = 0.4
stop = 1.0
steps = 4

[sector]
enabled = true
"#;

fn cfg(text: &str) -> ExperimentConfig {
    ExperimentConfig::from_toml_str(text).unwrap()
}

fn config_error(text: &str) -> (String, String) {
    match ExperimentConfig::from_toml_str(text) {
        Err(Error::Config { path, msg }) => (path, msg),
        other => panic!("expected a config error, got {other:?}"),
    }
}

#[test]
fn parses_with_defaults() {
    let c = cfg(AKLT);
    assert_eq!(c.model, Model::Aklt);
    assert_eq!(c.optimizer.init, InitMode::Warm);
    assert_eq!(c.optimizer.grad_tol, 1e-7);
    assert_eq!(c.random_model.n_instances, 1);
    assert_eq!(c.lambdas().len(), 4);
}

#[test]
fn field_errors_name_the_field() {
    let (p, _) = config_error(&AKLT.replace("steps = 4", "steps = 1"));
    assert_eq!(p, "lambda.steps");
    let (p, _) = config_error(&format!("{AKLT}\n[optimizer]\ngrad_tol = 0.0\n"));
    assert_eq!(p, "optimizer.grad_tol");
    let random = AKLT.replace("model = \"aklt\"", "model = \"random\"").replace("template = true", "");
    let (p, _) = config_error(&format!("{random}\n[random_model]\nn_instances = 0\n"));
    assert_eq!(p, "random_model.n_instances");
    let (p, _) = config_error(&AKLT.replace("stop = 1.0", "stop = 1.5"));
    assert_eq!(p, "lambda");
}

#[test]
fn unknown_keys_are_rejected() {
    let (_, msg) = config_error(&AKLT.replace("template = true", "template = true\nbogus = 3"));
    assert!(msg.contains("bogus"), "{msg}");
}

#[test]
fn validate_reports_sector_dimension() {
    let r = validate(&cfg(&AKLT.replace("n_sites = 6", "n_sites = 8")));
    assert!(r.ok);
    assert_eq!(r.sector_dim, Some(98));
    assert_eq!(r.n_params, 2);
}

#[test]
fn validate_refuses_oversized_ghz() {
    let r = validate(&cfg("model = \"ghz\"\nn_sites = 20\n[lambda]\nstart = -1.0\nstop = 1.0\nsteps = 3\n"));
    assert!(!r.ok);
    assert!(r.messages.iter().any(|m| m.contains("size guard")), "{:?}", r.messages);
    let r = validate(&cfg("model = \"ghz\"\nn_sites = 19\n[lambda]\nstart = -1.0\nstop = 1.0\nsteps = 3\n"));
    assert!(r.ok);
}

#[test]
fn validate_reports_random_blocking() {
    let r = validate(&cfg("model = \"random\"\nn_sites = 6\n[lambda]\nstart = 0.0\nstop = 1.0\nsteps = 2\n"));
    assert!(r.ok);
    assert_eq!(r.chain_sites, 3);
    assert_eq!(r.phys_dim, 4);
}

fn single(out: RunOutput) -> RunRecord {
    match out {
        RunOutput::Single(r) => r,
        RunOutput::Batch(_) => panic!("expected one instance"),
    }
}

#[test]
fn run_writes_files_and_csv_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let rec = single(run::run(&cfg(AKLT), &RunOptions { out_dir: Some(dir.path().into()), workers: 1 }).unwrap());
    assert!(rec.error.is_none());
    for f in ["results.csv", "results.json", "path.dat"] {
        assert!(dir.path().join(f).exists(), "{f}");
    }
    let text = std::fs::read_to_string(dir.path().join("results.csv")).unwrap();
    assert!(text.starts_with('#'));
    assert_eq!(text.lines().nth(1).unwrap(), "lambda,gap_canonical,gap_optimized,n_iter,converged,grad_norm,s_params_json");
    let parsed = read_csv(&text).unwrap();
    let json: RunRecord = serde_json::from_str(&std::fs::read_to_string(dir.path().join("results.json")).unwrap()).unwrap();
    assert_eq!(parsed.len(), json.rows.len());
    for (c, r) in parsed.iter().zip(&json.rows) {
        assert_eq!(c.0.to_bits(), r.lambda.to_bits());
        assert_eq!(c.1.to_bits(), r.gap_canonical.to_bits());
        assert_eq!(c.2.to_bits(), r.gap_optimized.to_bits());
        assert_eq!(c.3, r.n_iter);
        assert_eq!(c.4, r.converged);
        assert_eq!(c.5.to_bits(), r.grad_norm.to_bits());
        assert_eq!(c.6.iter().map(|x| x.to_bits()).collect::<Vec<_>>(), r.s_params.iter().map(|x| x.to_bits()).collect::<Vec<_>>());
        assert!(r.gap_optimized >= r.gap_canonical - 1e-12);
    }
    let dat = std::fs::read_to_string(dir.path().join("path.dat")).unwrap();
    assert_eq!(dat.split("\n\n\n").count(), 2);
}

#[test]
fn reruns_are_bitwise_identical() {
    let c = cfg(AKLT);
    let a = single(run::run(&c, &RunOptions { out_dir: Some(tempfile::tempdir().unwrap().path().into()), workers: 1 }).unwrap());
    let b = single(run::run(&c, &RunOptions { out_dir: Some(tempfile::tempdir().unwrap().path().into()), workers: 1 }).unwrap());
    assert_eq!(csv_body(&a.rows).unwrap(), csv_body(&b.rows).unwrap());
}

#[test]
fn random_batch_writes_one_directory_per_seed() {
    let text = "model = \"random\"\nn_sites = 6\n[lambda]\nstart = 0.5\nstop = 1.0\nsteps = 2\n\
                [optimizer]\nmax_iter = 30\n[random_model]\nseed = 4\nn_instances = 2\n";
    let dir = tempfile::tempdir().unwrap();
    let out = run::run(&cfg(text), &RunOptions { out_dir: Some(dir.path().into()), workers: 2 }).unwrap();
    let RunOutput::Batch(b) = out else { panic!("expected a batch") };
    assert_eq!(b.instances.len(), 2);
    assert_eq!(b.instances[0].seed, Some(4));
    assert_eq!(b.instances[1].seed, Some(5));
    for s in [4, 5] {
        assert!(dir.path().join(format!("seed-{s}/results.csv")).exists());
    }
    assert!(dir.path().join("results.json").exists());
}

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_parentgap"))
}

fn write(dir: &Path, name: &str, text: &str) -> std::path::PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

#[test]
fn binary_validate_and_run() {
    let dir = tempfile::tempdir().unwrap();
    let c = write(dir.path(), "aklt.toml", AKLT);
    let out = bin().args(["validate"]).arg(&c).output().unwrap();
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stdout).contains("sector dim       22"));

    let out_dir = dir.path().join("out");
    let out = bin()
        .args(["--log-level", "warn", "--workers", "2", "run"])
        .arg(&c)
        .arg("--out-dir")
        .arg(&out_dir)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(out_dir.join("results.csv").exists());

    let bad = write(dir.path(), "bad.toml", &AKLT.replace("steps = 4", "steps = 0"));
    let out = bin().arg("validate").arg(&bad).output().unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("lambda.steps"));
}
