use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;
use wsdaor::cli::{evaluate_checkpoint, load_checkpoint, load_dataset};
use wsdaor::diffcore::Tensor;
use wsdaor::experiment::Protocol;
use wsdaor::metrics::{Level, MetricsReport};
use wsdaor::milbags::{Domain, Sequence};
use wsdaor::network::{init_network, Layer, NetworkConfig};
use wsdaor::synth::save_csv;

const SMALL: &str = "\
[domain]
source_subjects = 3
target_subjects = 3
frames_per_sequence = 96

[train]
epochs = 3
lr = 0.003

[experiment]
window = 32
stride = 16
";

fn wsdaor(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_wsdaor"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn setup(config: &str) -> TempDir {
    let dir = TempDir::new().unwrap();
    fs::write(dir.path().join("c.toml"), config).unwrap();
    dir
}

fn run_ok(dir: &Path, args: &[&str]) -> Output {
    let o = wsdaor(dir, args);
    assert!(o.status.success(), "{args:?} failed: {}", stderr(&o));
    o
}

fn csv_rows(path: &Path) -> usize {
    fs::read_to_string(path).unwrap().lines().count() - 1
}

#[test]
fn generate_default_row_counts() {
    let dir = TempDir::new().unwrap();
    run_ok(dir.path(), &["generate", "--out", "d", "--quiet"]);
    assert_eq!(csv_rows(&dir.path().join("d/source.csv")), 20 * 300);
    assert_eq!(csv_rows(&dir.path().join("d/target.csv")), 10 * 300);
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("d/generate-manifest.json")).unwrap())
            .unwrap();
    assert_eq!(manifest["details"]["source_rows"], 6000);
}

#[test]
fn regenerate_is_byte_identical() {
    let dir = setup(SMALL);
    let p = dir.path();
    run_ok(p, &["--config", "c.toml", "--seed", "4", "--out", "a", "generate"]);
    run_ok(p, &["--config", "c.toml", "--seed", "4", "--out", "b", "generate"]);
    run_ok(p, &["--config", "c.toml", "--seed", "5", "--out", "c", "generate"]);
    for f in ["source.csv", "target.csv"] {
        let a = fs::read(p.join("a").join(f)).unwrap();
        assert_eq!(a, fs::read(p.join("b").join(f)).unwrap());
        assert_ne!(a, fs::read(p.join("c").join(f)).unwrap());
    }
}

#[test]
fn corrupt_config_exits_2_naming_key() {
    let dir = setup("[train]\nmomentum = \"lots\"\n");
    let o = wsdaor(dir.path(), &["--config", "c.toml", "generate"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("train.momentum"), "{}", stderr(&o));

    fs::write(dir.path().join("c.toml"), "[experiment]\nda_mode = \"sideways\"\n").unwrap();
    let o = wsdaor(dir.path(), &["--config", "c.toml", "train"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("experiment.da_mode"));
}

#[test]
fn missing_inputs_exit_3() {
    let dir = setup(SMALL);
    let o = wsdaor(dir.path(), &["--config", "c.toml", "--out", "none", "train"]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    let o = wsdaor(dir.path(), &["--config", "nope.toml", "generate"]);
    assert_eq!(o.status.code(), Some(3));
    let o = wsdaor(dir.path(), &["--config", "c.toml", "--out", "none", "ablate"]);
    assert_eq!(o.status.code(), Some(3));
}

fn history(dir: &Path) -> Vec<serde_json::Value> {
    serde_json::from_str(&fs::read_to_string(dir.join("history.json")).unwrap()).unwrap()
}

#[test]
fn train_writes_history_per_epoch_and_is_deterministic() {
    let dir = setup(SMALL);
    let p = dir.path();
    run_ok(p, &["--config", "c.toml", "--out", "d", "generate"]);
    for out in ["r1", "r2"] {
        run_ok(
            p,
            &["--config", "c.toml", "--out", out, "--quiet", "train", "--data", "d"],
        );
    }
    for f in ["checkpoint.txt", "history.json"] {
        assert_eq!(fs::read(p.join("r1").join(f)).unwrap(), fs::read(p.join("r2").join(f)).unwrap());
    }
    let h = history(&p.join("r1"));
    assert_eq!(h.len(), 3);
    for (i, r) in h.iter().enumerate() {
        assert_eq!(r["epoch"], i);
    }
    assert!(h.iter().skip(1).all(|r| r["loss"]["domain"].as_f64().unwrap() > 0.0));
}

#[test]
fn da_mode_none_has_zero_domain_loss() {
    let dir = setup(&format!("{SMALL}da_mode = \"none\"\n"));
    let p = dir.path();
    run_ok(p, &["--config", "c.toml", "--out", "d", "generate"]);
    run_ok(p, &["--config", "c.toml", "--out", "d", "--quiet", "train"]);
    let h = history(&p.join("d"));
    assert!(!h.is_empty());
    for r in h {
        assert_eq!(r["loss"]["domain"].as_f64(), Some(0.0));
        assert_eq!(r["lambda"].as_f64(), Some(0.0));
    }
}

#[test]
fn evaluate_matches_library_and_traces_every_frame() {
    let dir = setup(SMALL);
    let p = dir.path();
    run_ok(p, &["--config", "c.toml", "--out", "d", "generate"]);
    run_ok(p, &["--config", "c.toml", "--out", "d", "train"]);
    for level in ["frame", "sequence"] {
        // --level is global, so it may come before or after the subcommand
        if level == "frame" {
            run_ok(p, &["--config", "c.toml", "--out", "d", "evaluate", "--level", level]);
        } else {
            run_ok(p, &["--config", "c.toml", "--level", level, "--out", "d", "evaluate"]);
        }
        let json: MetricsReport = serde_json::from_str(
            &fs::read_to_string(p.join(format!("d/metrics-{level}.json"))).unwrap(),
        )
        .unwrap();
        let params = load_checkpoint(&p.join("d/checkpoint.txt")).unwrap();
        let data = load_dataset(&p.join("d")).unwrap();
        let protocol = Protocol {
            window: 32,
            stride: 16,
            ..Protocol::default()
        };
        let lvl = if level == "frame" { Level::Frame } else { Level::Sequence };
        assert_eq!(json, evaluate_checkpoint(&params, &data, &protocol, lvl).unwrap());
    }
    assert_eq!(csv_rows(&p.join("d/trace.csv")), 3 * 96);
}

/// A checkpoint whose ordinal head recovers the level from feature 0:
/// logits `a·k·x − a·k²/2` peak at the level nearest to `x`.
fn oracle_fixture(dir: &Path) -> PathBuf {
    let levels = 3;
    let cfg = NetworkConfig {
        input_dim: 2,
        feature_dim: 2,
        extractor_hidden: vec![],
        levels,
        ..NetworkConfig::default()
    };
    let mut params = init_network(&cfg).unwrap();
    params.extractor = vec![Layer {
        weight: Tensor::matrix(2, 2, vec![1.0, 0.0, 0.0, 1.0]).unwrap(),
        bias: Tensor::zeros(&[2]),
    }];
    let a = 10.0;
    params.target = vec![Layer {
        weight: Tensor::matrix(2, 3, vec![0.0, a, 2.0 * a, 0.0, 0.0, 0.0]).unwrap(),
        bias: Tensor::vector(vec![0.0, -a / 2.0, -2.0 * a]).unwrap(),
    }];
    let ckpt = dir.join("oracle.txt");
    fs::write(&ckpt, params.to_checkpoint()).unwrap();

    let seq = |subject, domain, labels: Vec<f64>| {
        let frames = labels.iter().map(|&l| vec![l, 0.5]).collect();
        Sequence::new(subject, 0, domain, frames, labels).unwrap()
    };
    let pattern: Vec<f64> = (0..40).map(|i| [0.0, 0.0, 1.0, 2.0, 1.0][i % 5]).collect();
    let data = dir.join("data");
    fs::create_dir_all(&data).unwrap();
    save_csv(
        &data.join("source.csv"),
        &[seq(0, Domain::Source, vec![-1.0; 40])],
    )
    .unwrap();
    save_csv(
        &data.join("target.csv"),
        &[seq(0, Domain::Target, pattern.clone()), seq(1, Domain::Target, pattern)],
    )
    .unwrap();
    ckpt
}

const ORACLE_CONFIG: &str = "\
[domain]
feature_dim = 2
levels = 3

[network]
input_dim = 2
levels = 3

[experiment]
window = 8
stride = 8
";

#[test]
fn perfect_oracle_checkpoint_scores_one() {
    let dir = setup(ORACLE_CONFIG);
    let p = dir.path();
    oracle_fixture(p);
    run_ok(
        p,
        &["--config", "c.toml", "--out", "o", "evaluate", "--checkpoint", "oracle.txt", "--data", "data"],
    );
    let m: MetricsReport =
        serde_json::from_str(&fs::read_to_string(p.join("o/metrics-frame.json")).unwrap()).unwrap();
    assert_eq!(m.pcc, Some(1.0));
    assert_eq!(m.icc, Some(1.0));
    assert_eq!(m.mae, 0.0);
    let trace = fs::read_to_string(p.join("o/trace.csv")).unwrap();
    assert_eq!(trace.lines().count() - 1, 80);
    assert!(trace.lines().skip(1).all(|l| {
        let f: Vec<&str> = l.split(',').collect();
        f[3] == f[4]
    }));
}

#[test]
fn shape_mismatch_exits_4() {
    let dir = setup(ORACLE_CONFIG);
    let p = dir.path();
    oracle_fixture(p);
    // default config expects 12 input features
    let o = wsdaor(p, &["evaluate", "--checkpoint", "oracle.txt", "--data", "data"]);
    assert_eq!(o.status.code(), Some(4), "{}", stderr(&o));

    fs::write(p.join("bad.txt"), "wsdaor-checkpoint 1\nconfig {}\n").unwrap();
    let o = wsdaor(p, &["--config", "c.toml", "evaluate", "--checkpoint", "bad.txt", "--data", "data"]);
    assert_eq!(o.status.code(), Some(4));

    let o = wsdaor(p, &["--config", "c.toml", "evaluate", "--checkpoint", "absent.txt", "--data", "data"]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn ablate_writes_four_rows_with_shared_seed() {
    let dir = setup(&SMALL.replace("epochs = 3", "epochs = 2"));
    let p = dir.path();
    run_ok(p, &["--config", "c.toml", "--seed", "11", "--out", "d", "generate"]);
    run_ok(p, &["--config", "c.toml", "--seed", "11", "--out", "d", "--quiet", "ablate"]);
    let text = fs::read_to_string(p.join("d/ablation.csv")).unwrap();
    let mut rows = csv::Reader::from_reader(text.as_bytes());
    let cells: Vec<csv::StringRecord> = rows.records().map(|r| r.unwrap()).collect();
    assert_eq!(cells.len(), 4);
    let names: Vec<&str> = cells.iter().map(|r| &r[0]).collect();
    assert_eq!(names, ["baseline", "baseline+amilp", "baseline+gm", "baseline+gm+amilp"]);
    assert!(cells.iter().all(|r| &r[4] == "11"));
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(p.join("d/ablate-manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["details"]["shared_seed"], 11);
    assert_eq!(manifest["seed"], 11);
}

#[test]
fn encode_prints_gaussian_codes() {
    let dir = TempDir::new().unwrap();
    let code = |args: &[&str]| -> serde_json::Value {
        let o = run_ok(dir.path(), args);
        serde_json::from_slice(&o.stdout).unwrap()
    };
    let v = code(&["encode", "--label", "2", "--sigma", "0.3", "--levels", "6"]);
    let values: Vec<f64> = v["values"].as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).collect();
    assert_eq!(values[2], 1.0);
    assert!((values[1] - (-1.0f64 / 0.18).exp()).abs() <= 1e-12);
    assert_eq!(values[1], values[3]);

    let n = code(&["encode", "--label", "0", "--sigma", "1.0", "-k", "3", "--normalize"]);
    let sum: f64 = n["values"].as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).sum();
    assert!((sum - 1.0).abs() <= 1e-12);

    let o = code(&["encode", "--label", "4", "--levels", "6", "--one-hot"]);
    assert_eq!(o["values"], serde_json::json!([0.0, 0.0, 0.0, 0.0, 1.0, 0.0]));

    let bad = wsdaor(dir.path(), &["encode", "--label", "6", "--levels", "6"]);
    assert_eq!(bad.status.code(), Some(2));
}
