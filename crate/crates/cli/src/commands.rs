use std::fmt;
use std::fs;
use std::path::Path;
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use hoga::circuit::{gen_csa_multiplier, parse_labels_csv, Label};
use hoga::graph::{
    build_node_features, normalize_adjacency, normalize_adjacency_with, parse_aiger_ascii, parse_edge_list,
    write_aiger_ascii, write_edge_list, AdjacencyMode, AdjacencyOptions, CircuitGraph, Csr,
};
use hoga::hop::{generate_hop_features, HopTensor};
use hoga::model::{
    Checkpoint, GcnConfig, GcnModel, Head, HogaModel, HopMlpConfig, HopMlpModel, ModelKind,
};
use hoga::train::{
    self, attention_csv, bench_csv, bench_scaling, regression_dataset, sample_per_class, GraphRegressor, Metrics,
    Task, TrainConfig, TrainHistory,
};

use crate::manifest::{sidecar, ManifestBuilder};
use crate::{AttnArgs, BenchArgs, EvalArgs, FeaturizeArgs, GenArgs, HyperArgs, Mode, ModelArg, TaskArg, TrainArgs};

/// A command-line misuse that clap cannot catch on its own.
#[derive(Debug)]
pub struct Usage(pub String);

impl fmt::Display for Usage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Usage {}

fn usage<T>(msg: impl Into<String>) -> Result<T> {
    Err(Usage(msg.into()).into())
}

pub fn exit_code(e: &anyhow::Error) -> u8 {
    for cause in e.chain() {
        if cause.downcast_ref::<Usage>().is_some() {
            return 2;
        }
        if let Some(err) = cause.downcast_ref::<hoga::Error>() {
            return match err {
                hoga::Error::Numeric(_) => 4,
                hoga::Error::InvalidArgument(_) => 2,
                _ => 3,
            };
        }
    }
    3
}

fn load_graph(mb: &mut ManifestBuilder, path: &Path) -> Result<CircuitGraph> {
    let text = mb.read_input_text(path)?;
    let g = if path.extension().is_some_and(|e| e == "aag") {
        parse_aiger_ascii(&text)
    } else {
        parse_edge_list(&text)
    };
    g.with_context(|| format!("parsing {}", path.display()))
}

fn load_hops(mb: &mut ManifestBuilder, path: &Path, graph: Option<&CircuitGraph>) -> Result<HopTensor> {
    let bytes = mb.read_input(path)?;
    let checksum = graph.map(CircuitGraph::checksum);
    HopTensor::read_from(bytes.as_slice(), checksum.as_ref()).with_context(|| format!("loading {}", path.display()))
}

fn load_labels(mb: &mut ManifestBuilder, path: &Path, n: usize) -> Result<Vec<usize>> {
    let text = mb.read_input_text(path)?;
    let labels = parse_labels_csv(&text, n).with_context(|| format!("parsing {}", path.display()))?;
    Ok(labels.into_iter().map(Label::index).collect())
}

fn require<'a>(p: &'a Option<std::path::PathBuf>, flag: &str, why: &str) -> Result<&'a Path> {
    match p {
        Some(p) => Ok(p),
        None => usage(format!("--{flag} is required {why}")),
    }
}

fn gcn_adjacency(g: &CircuitGraph) -> Arc<Csr> {
    Arc::new(normalize_adjacency(g, AdjacencyMode::SymmetricUndirected).csr().clone())
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

pub fn gen(a: GenArgs) -> Result<()> {
    let mut mb = ManifestBuilder::new("gen", &a)?;
    let w = a.bits as usize;
    let c = gen_csa_multiplier(w)?;
    create_dir(&a.out)?;
    let stem = format!("csa{w}");
    mb.write_output(&a.out.join(format!("{stem}.edges")), write_edge_list(&c.graph).as_bytes())?;
    mb.write_output(&a.out.join(format!("{stem}.aag")), write_aiger_ascii(&c.graph)?.as_bytes())?;
    mb.write_output(&a.out.join(format!("{stem}.labels.csv")), c.labels_csv().as_bytes())?;
    mb.finish(&a.out.join("manifest.json"))
}

pub fn featurize(a: FeaturizeArgs) -> Result<()> {
    let mut mb = ManifestBuilder::new("featurize", &a)?;
    let g = load_graph(&mut mb, &a.graph)?;
    let mode = match a.mode {
        Mode::Sym => AdjacencyMode::SymmetricUndirected,
        Mode::Fanin => AdjacencyMode::DirectedFanin,
    };
    let adj = normalize_adjacency_with(&g, mode, AdjacencyOptions { self_loops: a.self_loops });
    let hops = generate_hop_features(&adj, &build_node_features(&g), a.k as usize)?.with_graph_checksum(g.checksum());
    let mut bytes = Vec::with_capacity(hops.file_size());
    hops.write_to(&mut bytes)?;
    mb.write_output(&a.out, &bytes)?;
    mb.finish(&sidecar(&a.out))
}

fn train_config(mb: &mut ManifestBuilder, h: &HyperArgs, workers: Option<usize>, task: Task) -> Result<TrainConfig> {
    let mut cfg = match &h.config {
        Some(p) => {
            let text = mb.read_input_text(p)?;
            serde_json::from_str(&text).with_context(|| format!("parsing config {}", p.display()))?
        }
        None if task == Task::GraphRegress => TrainConfig::regression(),
        None => TrainConfig::default(),
    };
    cfg.task = task;
    if let Some(v) = h.epochs {
        cfg.epochs = v;
    }
    if let Some(v) = h.batch_size {
        cfg.batch_size = v;
    }
    if let Some(v) = h.lr {
        cfg.learning_rate = v;
    }
    if let Some(v) = h.hidden {
        cfg.hidden_dim = v;
    }
    if let Some(v) = h.layers {
        cfg.layers = v;
    }
    if let Some(v) = workers {
        cfg.workers = v;
    }
    if let Some(v) = h.seed {
        cfg.seed = v;
    }
    if h.no_class_weighting {
        cfg.class_weighting = false;
    }
    if cfg.batch_size == 0 || cfg.workers == 0 || cfg.hidden_dim == 0 || cfg.layers == 0 {
        return usage("batch size, workers, hidden width and layers must be positive");
    }
    Ok(cfg)
}

fn write_history(mb: &mut ManifestBuilder, dir: &Path, history: &TrainHistory, metrics: &Metrics) -> Result<()> {
    mb.write_output(&dir.join("metrics.csv"), history.to_csv().as_bytes())?;
    let json = serde_json::to_string_pretty(metrics)? + "\n";
    mb.write_output(&dir.join("metrics.json"), json.as_bytes())
}

fn check_finite(metrics_ok: bool) -> Result<()> {
    if !metrics_ok {
        return Err(hoga::Error::Numeric("parameters became non-finite".into()).into());
    }
    Ok(())
}

pub fn train(a: TrainArgs) -> Result<()> {
    let mut mb = ManifestBuilder::new("train", &a)?;
    let task = match a.task {
        TaskArg::Node => Task::NodeClass4,
        TaskArg::GraphRegress => Task::GraphRegress,
    };
    let mut cfg = train_config(&mut mb, &a.hyper, a.workers, task)?;
    create_dir(&a.out)?;
    let ckpt_path = a.out.join("checkpoint.bin");
    if task == Task::GraphRegress {
        if a.model != ModelArg::Hoga {
            return usage("graph regression is only available for --model hoga");
        }
        let data = regression_dataset(a.graphs, cfg.hops, cfg.seed)?;
        let split = (data.len() * 4 / 5).max(1);
        let (train_set, test_set) = data.split_at(split);
        let model = HogaModel::init(cfg.hoga_config(train_set[0].hops.dim()), cfg.seed)?;
        let mut reg = GraphRegressor::new(model, train_set)?;
        let mut hoga_cfg = reg.model.config.clone();
        hoga_cfg.scaled_attention = a.hyper.scaled_attention;
        reg.model.config = hoga_cfg;
        let history = reg.train(train_set, &cfg)?;
        check_finite(reg.model.params.is_finite())?;
        let eval_set = if test_set.is_empty() { train_set } else { test_set };
        let metrics = reg.evaluate(eval_set)?.with_loss_curve(history.loss_curve());
        let ckpt = Checkpoint {
            model: ModelKind::Hoga(reg.model.config.clone()),
            seed: cfg.seed,
            params: reg.model.params.clone(),
            target_scale: Some(reg.target_scale),
        };
        mb.write_output(&ckpt_path, &ckpt.to_bytes()?)?;
        write_history(&mut mb, &a.out, &history, &metrics)?;
        return mb.finish(&a.out.join("manifest.json"));
    }

    let graph = a.graph.as_deref().map(|p| load_graph(&mut mb, p)).transpose()?;
    let (ckpt, history, metrics) = match a.model {
        ModelArg::Gcn => {
            let g = graph.as_ref().map_or_else(|| usage("--graph is required for --model gcn"), Ok)?;
            let labels = load_labels(&mut mb, require(&a.labels, "labels", "for training")?, g.num_nodes())?;
            let x = build_node_features(g);
            let adj = gcn_adjacency(g);
            let mut m = GcnModel::init(GcnConfig::new(x.dim(), cfg.hidden_dim, Label::COUNT), cfg.seed)?;
            let history = train::train_gcn(&mut m, &adj, &x, &labels, &cfg)?;
            check_finite(m.params.is_finite())?;
            let metrics = train::evaluate_gcn(&m, &adj, &x, &labels)?;
            let ckpt = Checkpoint { model: ModelKind::Gcn(m.config), seed: cfg.seed, params: m.params, target_scale: None };
            (ckpt, history, metrics)
        }
        kind => {
            let hops = load_hops(&mut mb, require(&a.hops, "hops", "for hop models")?, graph.as_ref())?;
            let labels = load_labels(&mut mb, require(&a.labels, "labels", "for training")?, hops.num_nodes())?;
            cfg.hops = hops.hops();
            if kind == ModelArg::Hoga {
                let mut hc = cfg.hoga_config(hops.dim());
                hc.scaled_attention = a.hyper.scaled_attention;
                let mut m = HogaModel::init(hc, cfg.seed)?;
                let history = train::train(&mut m, &hops, &labels, &cfg)?;
                check_finite(m.params.is_finite())?;
                let metrics = train::evaluate(&m, &hops, &labels, Task::NodeClass4)?;
                (Checkpoint { model: ModelKind::Hoga(m.config), seed: cfg.seed, params: m.params, target_scale: None }, history, metrics)
            } else {
                let mc = HopMlpConfig { input_dim: hops.dim(), hops: hops.hops(), hidden_dim: cfg.hidden_dim, classes: Label::COUNT };
                let mut m = HopMlpModel::init(mc, cfg.seed)?;
                let history = train::train(&mut m, &hops, &labels, &cfg)?;
                check_finite(m.params.is_finite())?;
                let metrics = train::evaluate(&m, &hops, &labels, Task::NodeClass4)?;
                (Checkpoint { model: ModelKind::HopMlp(m.config), seed: cfg.seed, params: m.params, target_scale: None }, history, metrics)
            }
        }
    };
    mb.write_output(&ckpt_path, &ckpt.to_bytes()?)?;
    let metrics = metrics.with_loss_curve(history.loss_curve());
    write_history(&mut mb, &a.out, &history, &metrics)?;
    mb.finish(&a.out.join("manifest.json"))
}

fn load_ckpt(mb: &mut ManifestBuilder, path: &Path) -> Result<Checkpoint> {
    let bytes = mb.read_input(path)?;
    Checkpoint::from_bytes(&bytes).with_context(|| format!("loading {}", path.display()))
}

fn hoga_from(ckpt: &Checkpoint) -> Result<HogaModel> {
    match &ckpt.model {
        ModelKind::Hoga(cfg) => {
            let mut m = HogaModel::init(cfg.clone(), ckpt.seed)?;
            m.params.assign(ckpt.params.tensors().to_vec())?;
            Ok(m)
        }
        other => usage(format!("expected a HOGA checkpoint, found {other:?}")),
    }
}

pub fn eval(a: EvalArgs) -> Result<()> {
    let mut mb = ManifestBuilder::new("eval", &a)?;
    let ckpt = load_ckpt(&mut mb, &a.checkpoint)?;
    let graph = a.graph.as_deref().map(|p| load_graph(&mut mb, p)).transpose()?;
    let metrics = match &ckpt.model {
        ModelKind::Hoga(cfg) if cfg.head == Head::Regressor => {
            let model = hoga_from(&ckpt)?;
            let scale = ckpt.target_scale.context("regressor checkpoint lacks target_scale")?;
            let data = regression_dataset(a.graphs, cfg.hops, a.seed)?;
            GraphRegressor { model, target_scale: scale }.evaluate(&data)?
        }
        ModelKind::Gcn(cfg) => {
            let g = graph.as_ref().map_or_else(|| usage("--graph is required for a GCN checkpoint"), Ok)?;
            let labels = load_labels(&mut mb, require(&a.labels, "labels", "for evaluation")?, g.num_nodes())?;
            let mut m = GcnModel::init(cfg.clone(), ckpt.seed)?;
            m.params.assign(ckpt.params.tensors().to_vec())?;
            train::evaluate_gcn(&m, &gcn_adjacency(g), &build_node_features(g), &labels)?
        }
        kind => {
            let hops = load_hops(&mut mb, require(&a.hops, "hops", "for hop models")?, graph.as_ref())?;
            let labels = load_labels(&mut mb, require(&a.labels, "labels", "for evaluation")?, hops.num_nodes())?;
            match kind {
                ModelKind::HopMlp(cfg) => {
                    let mut m = HopMlpModel::init(cfg.clone(), ckpt.seed)?;
                    m.params.assign(ckpt.params.tensors().to_vec())?;
                    train::evaluate(&m, &hops, &labels, Task::NodeClass4)?
                }
                _ => train::evaluate(&hoga_from(&ckpt)?, &hops, &labels, Task::NodeClass4)?,
            }
        }
    };
    let json = serde_json::to_string_pretty(&metrics)? + "\n";
    mb.write_output(&a.out, json.as_bytes())?;
    mb.finish(&sidecar(&a.out))
}

pub fn attn(a: AttnArgs) -> Result<()> {
    let mut mb = ManifestBuilder::new("attn", &a)?;
    let ckpt = load_ckpt(&mut mb, &a.checkpoint)?;
    let model = hoga_from(&ckpt)?;
    if model.config.hops == 0 {
        bail!(Usage("model has K = 0 and no readout scores".into()));
    }
    let hops = load_hops(&mut mb, &a.hops, None)?;
    let labels = load_labels(&mut mb, &a.labels, hops.num_nodes())?;
    let sample = sample_per_class(&labels, Label::COUNT, a.per_class, a.seed);
    for (class, have) in &sample.short {
        let name = Label::from_index(*class).map_or("?", Label::name);
        eprintln!("warning: class {name} has {have} nodes, fewer than {}; exporting all of them", a.per_class);
    }
    let out = model.forward(&hops.shard(&sample.ids)?, false)?;
    let csv = attention_csv(&out.report, &sample.ids, &labels)?;
    mb.write_output(&a.out, csv.as_bytes())?;
    mb.finish(&sidecar(&a.out))
}

pub fn bench(a: BenchArgs) -> Result<()> {
    let mut mb = ManifestBuilder::new("bench", &a)?;
    let mut cfg = train_config(&mut mb, &a.hyper, None, Task::NodeClass4)?;
    if a.hyper.epochs.is_none() && a.hyper.config.is_none() {
        cfg.epochs = 1;
    }
    if a.workers.is_empty() || a.workers.contains(&0) {
        return usage("--workers needs positive counts");
    }
    let (hops, labels) = match a.bits {
        Some(w) => {
            let c = gen_csa_multiplier(w as usize)?;
            let adj = normalize_adjacency(&c.graph, AdjacencyMode::SymmetricUndirected);
            let hops = generate_hop_features(&adj, &build_node_features(&c.graph), a.k.max(1))?;
            (hops, c.label_indices())
        }
        None => {
            let hops = load_hops(&mut mb, require(&a.hops, "hops", "unless --bits is given")?, None)?;
            let labels = load_labels(&mut mb, require(&a.labels, "labels", "unless --bits is given")?, hops.num_nodes())?;
            (hops, labels)
        }
    };
    cfg.hops = hops.hops();
    let mut hc = cfg.hoga_config(hops.dim());
    hc.scaled_attention = a.hyper.scaled_attention;
    let model = HogaModel::init(hc, cfg.seed)?;
    let rows = bench_scaling(&model, &hops, &labels, &cfg, &a.workers)?;
    mb.write_output(&a.out, bench_csv(&rows).as_bytes())?;
    mb.finish(&sidecar(&a.out))
}
