use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use hoga::circuit::{gen_csa_multiplier, parse_labels_csv, verify_labels};
use hoga::graph::parse_edge_list;
use hoga::hop::{HopTensor, HEADER_BYTES};
use hoga::model::Checkpoint;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tempfile::TempDir;

fn hoga(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hoga")).args(args).output().expect("spawn hoga")
}

fn ok(args: &[&str]) -> Output {
    let out = hoga(args);
    assert!(out.status.success(), "hoga {args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    out
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn manifest(path: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn gen_one_bit() {
    let dir = TempDir::new().unwrap();
    ok(&["gen", "--kind", "csa", "--bits", "1", "--out", p(dir.path())]);
    let g = parse_edge_list(&fs::read_to_string(dir.path().join("csa1.edges")).unwrap()).unwrap();
    assert_eq!(g.nodes_of_kind(hoga::graph::NodeKind::AndGate).len(), 1);
    let aag = fs::read_to_string(dir.path().join("csa1.aag")).unwrap();
    assert!(aag.starts_with("aag 3 2 0 1 1"));
    assert_eq!(manifest(&dir.path().join("manifest.json"))["command"], "gen");
}

#[test]
fn gen_eight_bit_labels_verify() {
    let dir = TempDir::new().unwrap();
    ok(&["gen", "--bits", "8", "--out", p(dir.path())]);
    let reference = gen_csa_multiplier(8).unwrap();
    let g = parse_edge_list(&fs::read_to_string(dir.path().join("csa8.edges")).unwrap()).unwrap();
    assert_eq!(g, reference.graph);
    let labels = parse_labels_csv(&fs::read_to_string(dir.path().join("csa8.labels.csv")).unwrap(), g.num_nodes()).unwrap();
    assert_eq!(labels, reference.labels);
    assert!(verify_labels(&reference).unwrap().is_empty());
}

#[test]
fn gen_zero_bits_is_usage_error() {
    let dir = TempDir::new().unwrap();
    assert_eq!(hoga(&["gen", "--bits", "0", "--out", p(dir.path())]).status.code(), Some(2));
}

#[test]
fn featurize_path_and_determinism() {
    let dir = TempDir::new().unwrap();
    let graph = dir.path().join("path.edges");
    fs::write(&graph, "0 1\n").unwrap();
    let a = dir.path().join("a.hop");
    let b = dir.path().join("b.hop");
    ok(&["featurize", "--graph", p(&graph), "--k", "1", "--mode", "sym", "--out", p(&a)]);
    ok(&["featurize", "--graph", p(&graph), "--k", "1", "--mode", "sym", "--out", p(&b)]);
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
    let t = HopTensor::load(&a, None).unwrap();
    assert_eq!(t.node(0)[7..], t.node(1)[..7]);
    assert_eq!(t.node(1)[7..], t.node(0)[..7]);
    let m = manifest(&dir.path().join("a.hop.manifest.json"));
    assert_eq!(m["inputs"][0]["sha256"].as_str().unwrap().len(), 64);
    assert_eq!(hoga(&["featurize", "--graph", p(&graph), "--k", "0", "--out", p(&a)]).status.code(), Some(2));
}

#[test]
fn featurize_file_size() {
    let dir = TempDir::new().unwrap();
    ok(&["gen", "--bits", "8", "--out", p(dir.path())]);
    let out = dir.path().join("csa8.hop");
    ok(&["featurize", "--graph", p(&dir.path().join("csa8.aag")), "--k", "8", "--mode", "fanin", "--out", p(&out)]);
    let n = gen_csa_multiplier(8).unwrap().graph.num_nodes();
    assert_eq!(fs::metadata(&out).unwrap().len() as usize, 8 * n * 9 * 7 + HEADER_BYTES);
}

#[test]
fn malformed_graph_is_data_error() {
    let dir = TempDir::new().unwrap();
    let graph = dir.path().join("bad.edges");
    fs::write(&graph, "0 x\n").unwrap();
    let out = hoga(&["featurize", "--graph", p(&graph), "--k", "2", "--out", p(&dir.path().join("o.hop"))]);
    assert_eq!(out.status.code(), Some(3));
}

fn pipeline(dir: &Path) -> (std::path::PathBuf, std::path::PathBuf) {
    ok(&["gen", "--bits", "4", "--out", p(dir)]);
    let hops = dir.join("csa4.hop");
    ok(&["featurize", "--graph", p(&dir.join("csa4.edges")), "--k", "3", "--out", p(&hops)]);
    (hops, dir.join("csa4.labels.csv"))
}

#[test]
fn train_eval_attn_round() {
    let dir = TempDir::new().unwrap();
    let (hops, labels) = pipeline(dir.path());
    let run = dir.path().join("run");
    let graph = dir.path().join("csa4.edges");
    let ckpt_path = run.join("checkpoint.bin");
    let common = ["--hops", p(&hops), "--labels", p(&labels), "--graph", p(&graph)];
    let mut args = vec!["train"];
    args.extend(common);
    args.extend(["--epochs", "3", "--hidden", "8", "--seed", "5", "--out", p(&run)]);
    ok(&args);
    let ckpt = Checkpoint::from_bytes(&fs::read(&ckpt_path).unwrap()).unwrap();
    assert_eq!(ckpt.seed, 5);
    let curve = fs::read_to_string(run.join("metrics.csv")).unwrap();
    assert_eq!(curve.lines().count(), 4);

    let metrics = dir.path().join("eval.json");
    let mut args = vec!["eval", "--checkpoint", p(&ckpt_path)];
    args.extend(common);
    args.extend(["--out", p(&metrics)]);
    ok(&args);
    let m: serde_json::Value = serde_json::from_str(&fs::read_to_string(&metrics).unwrap()).unwrap();
    let acc = m["accuracy"].as_f64().unwrap();
    assert!((0.0..=1.0).contains(&acc));

    let csv = dir.path().join("attn.csv");
    let out = ok(&[
        "attn", "--checkpoint", p(&run.join("checkpoint.bin")), "--hops", p(&hops), "--labels", p(&labels),
        "--per-class", "100", "--seed", "3", "--out", p(&csv),
    ]);
    assert!(String::from_utf8_lossy(&out.stderr).contains("warning"));
    let text = fs::read_to_string(&csv).unwrap();
    let n = gen_csa_multiplier(4).unwrap().graph.num_nodes();
    assert_eq!(text.lines().count(), n + 1);
    assert_eq!(text.lines().next().unwrap(), "node_id,label,c_1,c_2,c_3");
    for line in text.lines().skip(1) {
        let s: f64 = line.split(',').skip(2).map(|v| v.parse::<f64>().unwrap()).sum();
        assert!((s - 1.0).abs() < 1e-6);
    }
}

#[test]
fn train_is_reproducible_and_config_file_works() {
    let dir = TempDir::new().unwrap();
    let (hops, labels) = pipeline(dir.path());
    let cfg = dir.path().join("cfg.json");
    fs::write(&cfg, r#"{"hidden_dim": 8, "epochs": 2, "batch_size": 16, "seed": 9}"#).unwrap();
    for run in ["r1", "r2"] {
        ok(&["train", "--config", p(&cfg), "--hops", p(&hops), "--labels", p(&labels), "--out", p(&dir.path().join(run))]);
    }
    for f in ["checkpoint.bin", "metrics.json"] {
        assert_eq!(fs::read(dir.path().join("r1").join(f)).unwrap(), fs::read(dir.path().join("r2").join(f)).unwrap());
    }
    let m = manifest(&dir.path().join("r1/manifest.json"));
    assert_eq!(m["inputs"].as_array().unwrap().len(), 3);
}

#[test]
fn baselines_train_through_cli() {
    let dir = TempDir::new().unwrap();
    let (hops, labels) = pipeline(dir.path());
    let edges = dir.path().join("csa4.edges");
    ok(&["train", "--model", "mlp", "--hops", p(&hops), "--labels", p(&labels), "--epochs", "2", "--hidden", "8", "--out", p(&dir.path().join("mlp"))]);
    ok(&["train", "--model", "gcn", "--graph", p(&edges), "--labels", p(&labels), "--epochs", "2", "--hidden", "8", "--out", p(&dir.path().join("gcn"))]);
    let out = hoga(&["train", "--model", "gcn", "--labels", p(&labels), "--out", p(&dir.path().join("x"))]);
    assert_eq!(out.status.code(), Some(2));
    let metrics = dir.path().join("gcn.json");
    ok(&["eval", "--checkpoint", p(&dir.path().join("gcn/checkpoint.bin")), "--graph", p(&edges), "--labels", p(&labels), "--out", p(&metrics)]);
}

#[test]
fn untrained_model_is_at_chance_on_balanced_toy_set() {
    let dir = TempDir::new().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let n = 400;
    let data: Vec<f64> = (0..n * 3 * 7).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let hops = dir.path().join("toy.hop");
    HopTensor::new(n, 2, 7, data).unwrap().save(&hops).unwrap();
    let labels = dir.path().join("toy.csv");
    let names = ["maj", "xor", "shared", "plain"];
    let csv: String = (0..n).map(|i| format!("{i},{}\n", names[i % 4])).collect();
    fs::write(&labels, csv).unwrap();
    let run = dir.path().join("run");
    ok(&["train", "--hops", p(&hops), "--labels", p(&labels), "--epochs", "0", "--hidden", "16", "--out", p(&run)]);
    let metrics = dir.path().join("m.json");
    ok(&["eval", "--checkpoint", p(&run.join("checkpoint.bin")), "--hops", p(&hops), "--labels", p(&labels), "--out", p(&metrics)]);
    let m: serde_json::Value = serde_json::from_str(&fs::read_to_string(&metrics).unwrap()).unwrap();
    let acc = m["accuracy"].as_f64().unwrap();
    assert!((acc - 0.25).abs() <= 0.1, "accuracy {acc}");
}

#[test]
fn bench_writes_one_row_per_worker_count() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("bench.csv");
    ok(&["bench", "--bits", "4", "--k", "2", "--workers", "1,2,4", "--hidden", "8", "--out", p(&out)]);
    let text = fs::read_to_string(&out).unwrap();
    let rows: Vec<&str> = text.lines().collect();
    assert_eq!(rows[0], "workers,seconds,epochs_per_sec,speedup,final_loss");
    assert_eq!(rows.len(), 4);
    assert!(rows[1].starts_with("1,") && rows[3].starts_with("4,"));
    let losses: Vec<f64> = rows[1..].iter().map(|r| r.rsplit(',').next().unwrap().parse().unwrap()).collect();
    for l in &losses {
        assert!(((l - losses[0]) / losses[0]).abs() < 1e-6);
    }
}

#[test]
fn graph_regression_reports_mape() {
    let dir = TempDir::new().unwrap();
    let run = dir.path().join("reg");
    ok(&["train", "--task", "graph-regress", "--graphs", "10", "--epochs", "2", "--hidden", "8", "--lr", "0.01", "--out", p(&run)]);
    let m: serde_json::Value = serde_json::from_str(&fs::read_to_string(run.join("metrics.json")).unwrap()).unwrap();
    assert!(m["mape"].as_f64().unwrap() >= 0.0);
    let metrics = dir.path().join("e.json");
    ok(&["eval", "--checkpoint", p(&run.join("checkpoint.bin")), "--graphs", "5", "--out", p(&metrics)]);
}
