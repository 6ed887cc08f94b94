use std::fs;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::time::Instant;

use lcfn_core::evaluation::MetricsReport;
use lcfn_core::model::{write_checkpoint, ModelParams};
use ndarray::Array2;

const TOY: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/data/toy.tsv");
const FAST: [&str; 8] = ["--epochs", "8", "--batch-size", "100", "--embed-dim", "8", "--cutoff", "0.1"];

fn lcfn(out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lcfn"))
        .arg("--out")
        .arg(out)
        .args(["--threads", "2"])
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn ok(out: &Path, args: &[&str]) -> String {
    let o = lcfn(out, args);
    assert!(o.status.success(), "lcfn {args:?} failed: {}", String::from_utf8_lossy(&o.stderr));
    String::from_utf8(o.stdout).unwrap()
}

fn fails(out: &Path, args: &[&str]) -> String {
    let o = lcfn(out, args);
    assert!(!o.status.success(), "lcfn {args:?} unexpectedly succeeded");
    String::from_utf8(o.stderr).unwrap()
}

fn prepared(dir: &Path) -> PathBuf {
    let out = dir.join("run");
    ok(&out, &["ingest", "--input", TOY, "--core-user", "2", "--core-item", "2"]);
    ok(&out, &["split", "--ratios", "0.8,0.1,0.1"]);
    out
}

fn pipeline(out: &Path) {
    ok(out, &["ingest", "--input", TOY]);
    ok(out, &["split"]);
    ok(out, &["eigen", "--cutoff", "0.1"]);
    ok(out, &[&["pretrain"][..], &FAST].concat());
    ok(out, &[&["train", "--pretrained"][..], &FAST].concat());
    ok(out, &["evaluate", "--phase", "test", "--ks", "2,5,10"]);
}

#[test]
fn toy_pipeline_is_fast_and_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    let started = Instant::now();
    pipeline(&a);
    assert!(started.elapsed().as_secs() < 60);
    pipeline(&b);
    for file in [
        "dataset/interactions.tsv",
        "split/train.tsv",
        "split/test.tsv",
        "eigen/user.lcfb",
        "eigen/item.lcfb",
        "pretrain/mf.ckpt",
        "train/model.ckpt",
        "metrics/test.json",
    ] {
        assert_eq!(fs::read(a.join(file)).unwrap(), fs::read(b.join(file)).unwrap(), "{file} differs");
    }
    let report: MetricsReport =
        serde_json::from_slice(&fs::read(a.join("metrics/test.json")).unwrap()).unwrap();
    assert_eq!(report.f1.len() + report.ndcg.len(), 6);
    assert!(!a.join(".lock").exists());
}

#[test]
fn split_seed_controls_files() {
    let dir = tempfile::tempdir().unwrap();
    let out = prepared(dir.path());
    let first = fs::read(out.join("split/test.tsv")).unwrap();
    ok(&out, &["split"]);
    assert_eq!(fs::read(out.join("split/test.tsv")).unwrap(), first);
    ok(&out, &["--seed", "9", "split"]);
    assert_ne!(fs::read(out.join("split/test.tsv")).unwrap(), first);
    assert!(fails(&out, &["split", "--ratios", "0.8,0.2"]).contains("3 values"));
}

#[test]
fn full_eigen_cache_and_cache_hit() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("small.tsv");
    let mut text = String::new();
    for u in 0..10 {
        for i in 0..8 {
            if (u + i) % 3 == 0 || u == i {
                text.push_str(&format!("u{u}\ti{i}\n"));
            }
        }
    }
    fs::write(&input, text).unwrap();
    let out = dir.path().join("run");
    ok(&out, &["ingest", "--input", input.to_str().unwrap()]);
    ok(&out, &["split", "--ratios", "0.8,0.1,0.1"]);
    let computed = ok(&out, &["eigen", "--cutoff", "1"]);
    assert!(computed.contains("computed 10 user and 8 item eigenpairs"), "{computed}");
    let again = ok(&out, &["eigen", "--cutoff", "1"]);
    assert!(again.contains("up to date"), "{again}");
}

#[test]
fn perfect_oracle_checkpoint_scores_one() {
    let dir = tempfile::tempdir().unwrap();
    let out = prepared(dir.path());
    let users: Vec<String> = fs::read_to_string(out.join("dataset/users.txt"))
        .unwrap()
        .lines()
        .map(String::from)
        .collect();
    let items: Vec<String> = fs::read_to_string(out.join("dataset/items.txt"))
        .unwrap()
        .lines()
        .map(String::from)
        .collect();
    // Scores are 1 exactly on test pairs: u0 = I, v0[i][u] = [(u, i) in test].
    let (m, n) = (users.len(), items.len());
    let mut v0 = Array2::zeros((n, m));
    for line in fs::read_to_string(out.join("split/test.tsv")).unwrap().lines() {
        let (u, i) = line.split_once('\t').unwrap();
        let u = users.iter().position(|x| x == u).unwrap();
        let i = items.iter().position(|x| x == i).unwrap();
        v0[[i, u]] = 1.0;
    }
    let params = ModelParams { u0: Array2::eye(m), v0, layers: vec![] };
    let ckpt = dir.path().join("oracle.ckpt");
    write_checkpoint(BufWriter::new(fs::File::create(&ckpt).unwrap()), &params).unwrap();
    ok(&out, &["evaluate", "--checkpoint", ckpt.to_str().unwrap(), "--ks", "2,5,10,20"]);
    let report: MetricsReport =
        serde_json::from_slice(&fs::read(out.join("metrics/test.json")).unwrap()).unwrap();
    for k in [2, 5, 10, 20] {
        assert!((report.ndcg(k).unwrap() - 1.0).abs() < 1e-12, "NDCG@{k}");
    }
}

#[test]
fn coarse_tuning_emits_nine_records() {
    let dir = tempfile::tempdir().unwrap();
    let out = prepared(dir.path());
    ok(&out, &["eigen", "--cutoff", "0.1"]);
    let args = ["tune", "--epochs", "2", "--batch-size", "200", "--embed-dim", "4", "--cutoff", "0.1"];
    ok(&out, &args);
    let cells = fs::read_to_string(out.join("tune/cells.jsonl")).unwrap();
    assert_eq!(cells.lines().count(), 9);
    for line in cells.lines() {
        let v: serde_json::Value = serde_json::from_str(line).unwrap();
        assert!(v["metric_value"].is_number());
    }
}

#[test]
fn missing_artifacts_name_the_producer() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("empty");
    assert!(fails(&out, &["split"]).contains("lcfn ingest"));
    let out = prepared(dir.path());
    assert!(fails(&out, &[&["train"][..], &FAST].concat()).contains("lcfn eigen"));
    assert!(fails(&out, &["evaluate"]).contains("lcfn train"));
    ok(&out, &["eigen", "--cutoff", "0.1"]);
    let stale = fails(&out, &["train", "--cutoff", "0.2", "--epochs", "1"]);
    assert!(stale.contains("--cutoff 0.2"), "{stale}");
}

#[test]
fn malformed_input_reports_line() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("bad.tsv");
    fs::write(&input, "a\tb\nno-tab-here\n").unwrap();
    let err = fails(&dir.path().join("run"), &["ingest", "--input", input.to_str().unwrap()]);
    assert!(err.contains(":2:"), "{err}");
}

#[test]
fn movielens_format() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("ratings.dat");
    fs::write(&input, "1::1193::5::978300760\n1::661::3::978302109\n2::1193::4::978298413\n").unwrap();
    let out = dir.path().join("run");
    let msg = ok(&out, &["ingest", "--input", input.to_str().unwrap(), "--format", "movielens"]);
    assert!(msg.contains("2 users, 2 items, 3 interactions"), "{msg}");
}

#[test]
fn held_lock_blocks_a_second_process() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    fs::create_dir_all(&out).unwrap();
    fs::write(out.join(".lock"), "1\n").unwrap();
    assert!(fails(&out, &["demo-gft"]).contains("in use"));
}

#[test]
fn demo_writes_spectrum_csv() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let csv = dir.path().join("s3.csv");
    let msg = ok(&out, &["demo-gft", "--n", "100", "--signal", "s3", "--csv", csv.to_str().unwrap()]);
    let text = fs::read_to_string(&csv).unwrap();
    assert!(text.starts_with("index,frequency,magnitude\n"));
    assert_eq!(text.lines().count(), 101);
    assert!(msg.contains("reconstruction error"));
    assert!(fails(&out, &["demo-gft", "--n", "30"]).contains("multiple of 20"));
}

#[test]
fn config_file_and_flags() {
    let dir = tempfile::tempdir().unwrap();
    let out = prepared(dir.path());
    let cfg = dir.path().join("run.conf");
    fs::write(&cfg, "layers = 0\nembed_dim = 4\nepochs = 2\nbatch_size = 500\n").unwrap();
    let msg = ok(&out, &["--config", cfg.to_str().unwrap(), "train", "--epochs", "3"]);
    assert!(msg.contains("of 3"), "{msg}");
    fs::write(&cfg, "colour = red\n").unwrap();
    assert!(fails(&out, &["--config", cfg.to_str().unwrap(), "train"]).contains("colour"));
}
