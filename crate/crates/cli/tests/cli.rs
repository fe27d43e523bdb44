use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_catalytic"));
    c.env_remove("CATALYTIC_THREADS");
    c
}

fn write_config(dir: &Path, name: &str, body: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, body).unwrap();
    p
}

fn run(sub: &str, config: &Path, out: &Path) -> Output {
    bin()
        .args([sub, "--quiet", "--config"])
        .arg(config)
        .arg("--out")
        .arg(out)
        .output()
        .unwrap()
}

fn stderr_json(o: &Output) -> Value {
    let s = String::from_utf8_lossy(&o.stderr);
    serde_json::from_str(s.lines().last().unwrap_or("")).unwrap_or_else(|_| panic!("stderr is not json: {s}"))
}

fn csv_files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut v: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "csv" || e == "ndjson"))
        .map(|p| {
            (
                p.file_name().unwrap().to_string_lossy().into_owned(),
                fs::read(&p).unwrap(),
            )
        })
        .collect();
    v.sort();
    v
}

const SIMULATE: &str = r#"{
  "lattice": { "dim": 1, "half_width": 2 },
  "gamma": 0.2,
  "horizon": 2.0,
  "initial": { "constant": { "theta1": 2, "theta2": 1 } },
  "replicates": 30,
  "seed": 99,
  "record_events": true
}"#;

const MOMENTS: &str = r#"{
  "lattice": { "dim": 1, "half_width": 1 },
  "gamma": 0.1,
  "theta1": 2,
  "theta2": 3,
  "t": 1.0,
  "replicates": 400,
  "seed": 5
}"#;

const COEXISTENCE: &str = r#"{
  "dim": 1,
  "gamma": 1.0,
  "horizons": [10, 50],
  "replicates": 50,
  "seed": 3
}"#;

const FSS: &str = r#"{
  "dim": 3,
  "n_values": [1],
  "T": 0.1,
  "theta1": 1,
  "theta2": 1,
  "gamma": 0.03,
  "grid": [[0, 0], [0.5, 1]],
  "replicates": 20,
  "diffusion_paths": 200,
  "dt": 0.01,
  "seed": 8
}"#;

const SDE: &str = r#"{
  "mode": "field",
  "lattice": { "dim": 1, "half_width": 1 },
  "gamma_tilde": 0.5,
  "initial": { "u": [1, 0.5, 0.2], "v": 0.4 },
  "t": 0.5,
  "dt": 0.01,
  "replicates": 20,
  "seed": 1
}"#;

const SDE_LIMIT: &str = r#"{
  "mode": "limit",
  "gamma_tilde": 0.5,
  "initial": { "u": 1, "v": 2 },
  "t": 0.5,
  "dt": 0.01,
  "replicates": 20,
  "seed": 1
}"#;

const KERNELS: &str = r#"{
  "lattice": { "dim": 3, "half_width": 1 },
  "times": [0.5, 2],
  "green_infinity": true
}"#;

const DUALITY: &str = r#"{
  "lattice": { "dim": 1, "half_width": 1 },
  "gamma_tilde": 0.0,
  "left": { "u": [1, 0.5, 0.2], "v": [0.3, 0.8, 0.6] },
  "right": { "u": [0.4, 0.1, 0.3], "v": 0.2 },
  "t": 0.5,
  "dt": 0.001,
  "replicates": 2,
  "seed": 1
}"#;

const ALL: [(&str, &str); 8] = [
    ("simulate", SIMULATE),
    ("moments-check", MOMENTS),
    ("coexistence", COEXISTENCE),
    ("fss", FSS),
    ("simulate-sde", SDE),
    ("simulate-sde", SDE_LIMIT),
    ("kernels", KERNELS),
    ("duality-check", DUALITY),
];

#[test]
fn every_subcommand_reruns_byte_identically() {
    let dir = tempfile::tempdir().unwrap();
    for (i, (sub, body)) in ALL.iter().enumerate() {
        let cfg = write_config(dir.path(), &format!("c{i}.json"), body);
        let a = dir.path().join(format!("a{i}"));
        let b = dir.path().join(format!("b{i}"));
        let oa = run(sub, &cfg, &a);
        assert_eq!(
            oa.status.code(),
            Some(0),
            "{sub}: {}",
            String::from_utf8_lossy(&oa.stderr)
        );
        let ob = run(sub, &cfg, &b);
        assert_eq!(ob.status.code(), Some(0), "{sub}");
        let (fa, fb) = (csv_files(&a), csv_files(&b));
        assert!(!fa.is_empty(), "{sub} wrote no tables");
        assert_eq!(fa, fb, "{sub} outputs differ between reruns");

        let manifest: Value = serde_json::from_slice(&fs::read(a.join("manifest.json")).unwrap()).unwrap();
        assert_eq!(manifest["subcommand"], *sub);
        let hash = manifest["config_hash"].as_str().unwrap().to_string();
        let seed = manifest["master_seed"].as_u64().unwrap();
        for (name, bytes) in &fa {
            let text = String::from_utf8_lossy(bytes);
            let first = text.lines().next().unwrap();
            assert!(first.contains(&hash), "{name} lacks config hash");
            let tagged = first.contains(&format!("seed={seed}")) || first.contains(&format!("\"seed\":{seed}"));
            assert!(tagged, "{name} lacks seed");
        }
        let listed: Vec<&str> = manifest["outputs"]
            .as_array()
            .unwrap()
            .iter()
            .map(|o| o["file"].as_str().unwrap())
            .collect();
        for (name, _) in &fa {
            assert!(listed.contains(&name.as_str()), "{name} not in manifest");
        }
    }
}

#[test]
fn thread_count_does_not_change_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.json", SIMULATE);
    let mut outs = Vec::new();
    for threads in ["1", "3"] {
        let out = dir.path().join(format!("t{threads}"));
        let o = bin()
            .env("CATALYTIC_THREADS", threads)
            .args(["simulate", "-q", "-c"])
            .arg(&cfg)
            .arg("-o")
            .arg(&out)
            .output()
            .unwrap();
        assert_eq!(o.status.code(), Some(0));
        let m: Value = serde_json::from_slice(&fs::read(out.join("manifest.json")).unwrap()).unwrap();
        assert_eq!(m["threads"].as_u64().unwrap().to_string(), threads);
        outs.push(csv_files(&out));
    }
    assert_eq!(outs[0], outs[1]);
}

#[test]
fn bad_thread_env_is_a_validation_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.json", SIMULATE);
    let o = bin()
        .env("CATALYTIC_THREADS", "zero")
        .args(["simulate", "-c"])
        .arg(&cfg)
        .arg("-o")
        .arg(dir.path().join("o"))
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn empty_replicate_count_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let body = SIMULATE.replace("\"replicates\": 30", "\"replicates\": 0");
    let cfg = write_config(dir.path(), "c.json", &body);
    let o = run("simulate", &cfg, &dir.path().join("o"));
    assert_eq!(o.status.code(), Some(2));
    let err = stderr_json(&o);
    assert_eq!(err["error"], "config");
    assert!(err["messages"][0].as_str().unwrap().starts_with("replicates"));
}

#[test]
fn every_offending_field_is_listed() {
    let dir = tempfile::tempdir().unwrap();
    let body = r#"{
      "lattice": { "dim": 1, "half_width": 1 },
      "gamma": -1,
      "kappa": 0,
      "horizon": 1,
      "initial": { "constant": { "theta1": 1, "theta2": 1 } },
      "replicates": 0,
      "seed": 1
    }"#;
    let o = run(
        "simulate",
        &write_config(dir.path(), "c.json", body),
        &dir.path().join("o"),
    );
    assert_eq!(o.status.code(), Some(2));
    let msgs = stderr_json(&o)["messages"].as_array().unwrap().clone();
    let fields: Vec<&str> = msgs
        .iter()
        .map(|m| m.as_str().unwrap().split(':').next().unwrap())
        .collect();
    assert_eq!(fields, vec!["kappa", "gamma", "replicates"]);
}

#[test]
fn parse_errors_and_unknown_fields_are_validation_errors() {
    let dir = tempfile::tempdir().unwrap();
    let unknown = SIMULATE.replace("\"seed\": 99", "\"seed\": 99, \"sed\": 1");
    let o = run(
        "simulate",
        &write_config(dir.path(), "u.json", &unknown),
        &dir.path().join("o"),
    );
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(stderr_json(&o)["error"], "parse");
    let o = run("simulate", &dir.path().join("missing.json"), &dir.path().join("o"));
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn fss_gamma_gate() {
    let dir = tempfile::tempdir().unwrap();
    let big = FSS.replace("\"gamma\": 0.03", "\"gamma\": 0.05");
    let o = run("fss", &write_config(dir.path(), "g.json", &big), &dir.path().join("o"));
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr_json(&o)["messages"][0].as_str().unwrap().contains("bound"));
    let forced = big.replace("\"seed\": 8", "\"seed\": 8, \"allow_large_gamma\": true");
    let o = run(
        "fss",
        &write_config(dir.path(), "f.json", &forced),
        &dir.path().join("o2"),
    );
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn failed_check_exits_with_three() {
    let dir = tempfile::tempdir().unwrap();
    // A threshold no Monte Carlo estimate can meet.
    let strict = MOMENTS.replace("\"seed\": 5", "\"seed\": 5, \"z_threshold\": 1e-9");
    let out = dir.path().join("o");
    let o = run("moments-check", &write_config(dir.path(), "c.json", &strict), &out);
    assert_eq!(o.status.code(), Some(3));
    let text = fs::read_to_string(out.join("moments.csv")).unwrap();
    assert!(text.contains(",false"));
    let m: Value = serde_json::from_slice(&fs::read(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(m["passed"], false);
}

#[test]
fn plot_subcommand_checks_schema() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.json", COEXISTENCE);
    let out = dir.path().join("o");
    assert_eq!(run("coexistence", &cfg, &out).status.code(), Some(0));
    assert!(out.join("plot_coexistence.py").exists());
    let o = bin()
        .args(["plot", "--kind", "fss"])
        .arg(out.join("survival.csv"))
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
    let err = stderr_json(&o);
    assert_eq!(err["error"], "schema");
    assert!(err["messages"]
        .as_array()
        .unwrap()
        .iter()
        .any(|m| m.as_str().unwrap().contains("gap")));
    let o = bin()
        .args(["plot", "--kind", "coexistence"])
        .arg(out.join("survival.csv"))
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0));
}

#[test]
fn shipped_configs_parse() {
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut seen = 0;
    for entry in fs::read_dir(&root).unwrap() {
        let p = entry.unwrap().path();
        let text = fs::read_to_string(&p).unwrap();
        let name = p.file_stem().unwrap().to_string_lossy().into_owned();
        use catalytic::experiments::*;
        let ok = match name.split('_').next().unwrap() {
            "simulate" => parse_config::<SimulateConfig>(&text).and_then(|c| c.validate()).is_ok(),
            "sde" => parse_config::<SimulateSdeConfig>(&text)
                .and_then(|c| c.validate())
                .is_ok(),
            "kernels" => parse_config::<KernelsConfig>(&text).and_then(|c| c.validate()).is_ok(),
            "moments" => parse_config::<MomentsCheckConfig>(&text)
                .and_then(|c| c.validate())
                .is_ok(),
            "coexistence" => parse_config::<CoexistenceConfig>(&text)
                .and_then(|c| c.validate())
                .is_ok(),
            "fss" => parse_config::<FssExperimentConfig>(&text)
                .and_then(|c| c.to_fss())
                .is_ok(),
            "duality" => parse_config::<DualityCheckConfig>(&text)
                .and_then(|c| c.to_duality())
                .is_ok(),
            other => panic!("unexpected config {other}"),
        };
        assert!(ok, "{} does not validate", p.display());
        seen += 1;
    }
    assert!(seen >= 7);
}
