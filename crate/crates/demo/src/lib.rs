//! Browser demo of the HOGA pipeline. Every operation takes plain numbers and
//! returns a JSON string, so the same functions run natively in tests and in
//! the page through `wasm-bindgen`.

use hoga::circuit::{gen_csa_multiplier, verify_labels, Label};
use hoga::graph::{build_node_features, normalize_adjacency, AdjacencyMode, NodeKind};
use hoga::hop::generate_hop_features;
use hoga::model::HogaModel;
use hoga::train::{self, Task, TrainConfig};
use serde::Serialize;

/// Widest multiplier the page offers; keeps every call interactive.
pub const MAX_DEMO_BITS: usize = 16;

#[derive(Serialize)]
struct Summary {
    bits: usize,
    nodes: usize,
    edges: usize,
    and_gates: usize,
    labels: Vec<(String, usize)>,
    label_mismatches: usize,
    a: u64,
    b: u64,
    product: String,
    expected: String,
}

#[derive(Serialize)]
struct HopProfile {
    hops: usize,
    classes: Vec<String>,
    /// `mean_norm[class][k]`: mean L2 norm of hop-k rows over the class.
    mean_norm: Vec<Vec<f64>>,
}

#[derive(Serialize)]
struct TrainResult {
    loss_curve: Vec<f64>,
    accuracy: f64,
    per_class_accuracy: Vec<Option<f64>>,
    classes: Vec<String>,
    /// `mean_scores[class][k-1]`: readout score `c_k` averaged over the class.
    mean_scores: Vec<Vec<f64>>,
}

fn check_bits(bits: usize) -> Result<(), String> {
    if bits == 0 || bits > MAX_DEMO_BITS {
        return Err(format!("bits must be in 1..={MAX_DEMO_BITS}"));
    }
    Ok(())
}

fn class_names() -> Vec<String> {
    Label::ALL.iter().map(|l| l.name().to_string()).collect()
}

fn to_json(v: &impl Serialize) -> Result<String, String> {
    serde_json::to_string(v).map_err(|e| e.to_string())
}

/// Generates a CSA multiplier, checks its labels and multiplies two sample
/// operands by simulation.
pub fn multiplier_summary(bits: usize) -> Result<String, String> {
    check_bits(bits)?;
    let c = gen_csa_multiplier(bits).map_err(|e| e.to_string())?;
    let mismatches = verify_labels(&c).map_err(|e| e.to_string())?.len();
    let a = (1u64 << bits) - 1;
    let b = 0x5555_5555_5555_5555u64 & a;
    let product = c.multiply(a, b).map_err(|e| e.to_string())?;
    let counts = c.label_counts();
    to_json(&Summary {
        bits,
        nodes: c.graph.num_nodes(),
        edges: c.graph.num_edges(),
        and_gates: c.graph.nodes_of_kind(NodeKind::AndGate).len(),
        labels: Label::ALL.iter().map(|l| (l.name().to_string(), counts[l.index()])).collect(),
        label_mismatches: mismatches,
        a,
        b,
        product: product.to_string(),
        expected: (a as u128 * b as u128).to_string(),
    })
}

/// Per-class mean norm of every hop row; `fanin` picks directed propagation.
pub fn hop_profile(bits: usize, hops: usize, fanin: bool) -> Result<String, String> {
    check_bits(bits)?;
    if hops == 0 || hops > 16 {
        return Err("hops must be in 1..=16".into());
    }
    let c = gen_csa_multiplier(bits).map_err(|e| e.to_string())?;
    let mode = if fanin { AdjacencyMode::DirectedFanin } else { AdjacencyMode::SymmetricUndirected };
    let adj = normalize_adjacency(&c.graph, mode);
    let t = generate_hop_features(&adj, &build_node_features(&c.graph), hops).map_err(|e| e.to_string())?;
    let mut sums = vec![vec![0.0; hops + 1]; Label::COUNT];
    let mut counts = vec![0usize; Label::COUNT];
    for (i, label) in c.labels.iter().enumerate() {
        counts[label.index()] += 1;
        for (k, row) in t.node(i).chunks(t.dim()).enumerate() {
            sums[label.index()][k] += row.iter().map(|v| v * v).sum::<f64>().sqrt();
        }
    }
    let mean_norm = sums
        .into_iter()
        .zip(&counts)
        .map(|(row, &n)| row.into_iter().map(|s| if n == 0 { 0.0 } else { s / n as f64 }).collect())
        .collect();
    to_json(&HopProfile { hops, classes: class_names(), mean_norm })
}

/// Trains a small HOGA model on one multiplier and reports the loss curve,
/// accuracy and class-averaged readout scores.
pub fn train_attention(bits: usize, hops: usize, hidden: usize, epochs: usize, lr: f64, seed: u64) -> Result<String, String> {
    check_bits(bits)?;
    if hops == 0 || hops > 16 || hidden == 0 || hidden > 128 || epochs > 500 {
        return Err("need 1 ≤ hops ≤ 16, 1 ≤ hidden ≤ 128, epochs ≤ 500".into());
    }
    let c = gen_csa_multiplier(bits).map_err(|e| e.to_string())?;
    let adj = normalize_adjacency(&c.graph, AdjacencyMode::SymmetricUndirected);
    let t = generate_hop_features(&adj, &build_node_features(&c.graph), hops).map_err(|e| e.to_string())?;
    let labels = c.label_indices();
    let cfg = TrainConfig { hops, hidden_dim: hidden, epochs, learning_rate: lr, batch_size: 32, seed, ..TrainConfig::default() };
    let mut model = HogaModel::init(cfg.hoga_config(t.dim()), seed).map_err(|e| e.to_string())?;
    let history = train::train(&mut model, &t, &labels, &cfg).map_err(|e| e.to_string())?;
    let metrics = train::evaluate(&model, &t, &labels, Task::NodeClass4).map_err(|e| e.to_string())?;
    let report = model.forward(&t, false).map_err(|e| e.to_string())?.report;
    let mut mean_scores = vec![vec![0.0; hops]; Label::COUNT];
    let mut counts = vec![0usize; Label::COUNT];
    for (i, &l) in labels.iter().enumerate() {
        counts[l] += 1;
        for (acc, s) in mean_scores[l].iter_mut().zip(report.node_scores(i)) {
            *acc += s;
        }
    }
    for (row, &n) in mean_scores.iter_mut().zip(&counts) {
        row.iter_mut().for_each(|v| *v /= n.max(1) as f64);
    }
    to_json(&TrainResult {
        loss_curve: history.loss_curve(),
        accuracy: metrics.accuracy.unwrap_or(0.0),
        per_class_accuracy: metrics.per_class_accuracy,
        classes: class_names(),
        mean_scores,
    })
}

#[cfg(target_arch = "wasm32")]
mod bindings {
    use wasm_bindgen::prelude::*;

    #[wasm_bindgen(js_name = multiplierSummary)]
    pub fn multiplier_summary(bits: usize) -> Result<String, JsValue> {
        super::multiplier_summary(bits).map_err(|e| JsValue::from_str(&e))
    }

    #[wasm_bindgen(js_name = hopProfile)]
    pub fn hop_profile(bits: usize, hops: usize, fanin: bool) -> Result<String, JsValue> {
        super::hop_profile(bits, hops, fanin).map_err(|e| JsValue::from_str(&e))
    }

    #[wasm_bindgen(js_name = trainAttention)]
    pub fn train_attention(bits: usize, hops: usize, hidden: usize, epochs: usize, lr: f64, seed: u64) -> Result<String, JsValue> {
        super::train_attention(bits, hops, hidden, epochs, lr, seed).map_err(|e| JsValue::from_str(&e))
    }
}
