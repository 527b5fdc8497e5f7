//! Independent dense reference implementations used as test oracles.
#![allow(dead_code)]

use hoga::graph::{AdjacencyMode, CircuitGraph, Edge};
use hoga::model::HogaModel;
use rand::Rng;

pub type Dense = Vec<Vec<f64>>;

pub fn zeros(r: usize, c: usize) -> Dense {
    vec![vec![0.0; c]; r]
}

pub fn matmul(a: &Dense, b: &Dense) -> Dense {
    let mut out = zeros(a.len(), b[0].len());
    for i in 0..a.len() {
        for j in 0..b[0].len() {
            let mut s = 0.0;
            for k in 0..b.len() {
                s += a[i][k] * b[k][j];
            }
            out[i][j] = s;
        }
    }
    out
}

pub fn transpose(a: &Dense) -> Dense {
    let mut out = zeros(a[0].len(), a.len());
    for (i, row) in a.iter().enumerate() {
        for (j, &v) in row.iter().enumerate() {
            out[j][i] = v;
        }
    }
    out
}

/// Dense normalized adjacency built straight from the edge list.
pub fn dense_adjacency(g: &CircuitGraph, mode: AdjacencyMode) -> Dense {
    let n = g.num_nodes();
    let mut a = zeros(n, n);
    match mode {
        AdjacencyMode::SymmetricUndirected => {
            for e in g.edges() {
                a[e.src][e.dst] = 1.0;
                a[e.dst][e.src] = 1.0;
            }
            let deg: Vec<f64> = a.iter().map(|r| r.iter().sum()).collect();
            for i in 0..n {
                for j in 0..n {
                    if a[i][j] != 0.0 {
                        a[i][j] = 1.0 / (deg[i] * deg[j]).sqrt();
                    }
                }
            }
        }
        AdjacencyMode::DirectedFanin => {
            for e in g.edges() {
                a[e.dst][e.src] = 1.0;
            }
            for row in a.iter_mut() {
                let d: f64 = row.iter().sum();
                if d > 0.0 {
                    row.iter_mut().for_each(|v| *v /= d);
                }
            }
        }
    }
    a
}

/// Random simple directed graph (no self-loops or duplicate edges).
pub fn random_graph<R: Rng>(rng: &mut R, n: usize, edge_prob: f64) -> CircuitGraph {
    let mut edges = Vec::new();
    for s in 0..n {
        for d in 0..n {
            if s != d && rng.gen_bool(edge_prob) {
                edges.push(Edge::new(s, d, rng.gen_bool(0.5)));
            }
        }
    }
    CircuitGraph::from_edges_inferred(n, edges).unwrap()
}

pub fn random_dense<R: Rng>(rng: &mut R, r: usize, c: usize) -> Dense {
    (0..r).map(|_| (0..c).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect()
}

fn param(m: &HogaModel, name: &str) -> Dense {
    let t = m.params.get(name).unwrap();
    let cols = *t.shape().last().unwrap();
    t.data().chunks(cols).map(|c| c.to_vec()).collect()
}

fn vector(m: &HogaModel, name: &str) -> Vec<f64> {
    m.params.get(name).unwrap().data().to_vec()
}

fn softmax(row: &[f64]) -> Vec<f64> {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = row.iter().map(|v| (v - max).exp()).collect();
    let s: f64 = e.iter().sum();
    e.iter().map(|v| v / s).collect()
}

/// One node's output, written out step by step from the model definition.
pub struct NodeReference {
    pub outputs: Vec<f64>,
    pub scores: Vec<f64>,
    /// Per layer: input rows, attention matrix, output rows.
    pub layers: Vec<(Dense, Dense, Dense)>,
}

pub fn hoga_reference(m: &HogaModel, block: &[f64]) -> NodeReference {
    let cfg = &m.config;
    let d0 = cfg.input_dim;
    let x: Dense = block.chunks(d0).map(|c| c.to_vec()).collect();
    let mut h = matmul(&x, &param(m, "w_in"));
    let mut layers = Vec::new();
    for l in 0..cfg.layers {
        let p = |w: &str| param(m, &format!("layer{l}.{w}"));
        let q = matmul(&h, &p("w_q"));
        let k = matmul(&h, &p("w_k"));
        let u = matmul(&h, &p("w_u"));
        let v = matmul(&h, &p("w_v"));
        let mut logits = matmul(&q, &transpose(&k));
        if cfg.scaled_attention {
            let s = 1.0 / (cfg.hidden_dim as f64).sqrt();
            logits.iter_mut().flatten().for_each(|x| *x *= s);
        }
        let s: Dense = logits.iter().map(|r| softmax(r)).collect();
        let sv = matmul(&s, &v);
        let gamma = vector(m, &format!("layer{l}.ln_scale"));
        let beta = vector(m, &format!("layer{l}.ln_bias"));
        let mut out = zeros(h.len(), cfg.hidden_dim);
        for i in 0..h.len() {
            let g: Vec<f64> = (0..cfg.hidden_dim).map(|j| u[i][j] * sv[i][j]).collect();
            let row = if cfg.layer_norm {
                let mean = g.iter().sum::<f64>() / g.len() as f64;
                let var = g.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / g.len() as f64;
                g.iter().enumerate().map(|(j, x)| (x - mean) / (var + 1e-5).sqrt() * gamma[j] + beta[j]).collect()
            } else {
                g
            };
            out[i] = if cfg.relu { row.into_iter().map(|x| x.max(0.0)).collect() } else { row };
        }
        layers.push((h.clone(), s, out.clone()));
        h = out;
    }
    let alpha = vector(m, "alpha");
    let d = cfg.hidden_dim;
    let mut y = h[0].clone();
    let mut scores = Vec::new();
    if cfg.hops > 0 {
        let e: Vec<f64> = (1..=cfg.hops)
            .map(|k| (0..d).map(|j| alpha[j] * h[0][j] + alpha[d + j] * h[k][j]).sum())
            .collect();
        scores = softmax(&e);
        for k in 1..=cfg.hops {
            for j in 0..d {
                y[j] += scores[k - 1] * h[k][j];
            }
        }
    }
    let w = param(m, "head.w");
    let b = vector(m, "head.b");
    let outputs = (0..b.len()).map(|c| b[c] + (0..d).map(|j| y[j] * w[j][c]).sum::<f64>()).collect();
    NodeReference { outputs, scores, layers }
}
