//! Losses, Adam, the data-parallel training driver and evaluation.
//!
//! Each step takes the next mini-batch of a seeded shuffle, splits it into
//! `workers` contiguous shards, runs forward and backward on every shard in
//! parallel, sums shard gradients in shard order, divides by the batch's
//! total loss weight and applies one Adam update.

mod adam;
mod attention;
mod bench;
mod losses;
mod metrics;
mod regress;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use attention::{attention_csv, sample_per_class, ClassSample};
pub use bench::{bench_scaling, bench_csv, BenchRow};
pub use losses::{cross_entropy, inverse_frequency_weights, mape};
pub use metrics::{argmax_rows, classification_metrics, Metrics};
pub use regress::{regression_dataset, GraphRegressor, RegressionSample};

use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::circuit::Label;
use crate::graph::{Csr, NodeFeatures};
use crate::hop::HopTensor;
use crate::model::{GcnModel, Head, HogaConfig, NodeModel, ParamList};
use crate::numerics::{Tape, Tensor};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    /// Four-way node classification (Maj / Xor / Shared / Plain).
    #[default]
    NodeClass4,
    /// One scalar per graph, scored by MAPE.
    GraphRegress,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub hops: usize,
    pub hidden_dim: usize,
    pub layers: usize,
    pub learning_rate: f64,
    pub epochs: usize,
    /// Nodes per step for node tasks, graphs per step for graph tasks.
    pub batch_size: usize,
    pub workers: usize,
    pub seed: u64,
    pub task: Task,
    pub adam: AdamConfig,
    /// Inverse-frequency class weights in the node loss.
    pub class_weighting: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            hops: 8,
            hidden_dim: 256,
            layers: 1,
            learning_rate: 1e-4,
            epochs: 300,
            batch_size: 64,
            workers: 1,
            seed: 0,
            task: Task::NodeClass4,
            adam: AdamConfig::default(),
            class_weighting: true,
        }
    }
}

impl TrainConfig {
    /// Defaults for the graph-regression task (`K = 5`).
    pub fn regression() -> Self {
        TrainConfig { hops: 5, task: Task::GraphRegress, class_weighting: false, batch_size: 8, ..TrainConfig::default() }
    }

    pub fn hoga_config(&self, input_dim: usize) -> HogaConfig {
        let head = match self.task {
            Task::NodeClass4 => Head::Classifier { classes: Label::COUNT },
            Task::GraphRegress => Head::Regressor,
        };
        HogaConfig { layers: self.layers, ..HogaConfig::new(input_dim, self.hidden_dim, self.hops, head) }
    }

    fn validate(&self) -> Result<()> {
        if self.batch_size == 0 || self.workers == 0 {
            return Err(Error::InvalidArgument("batch_size and workers must be positive".into()));
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(Error::InvalidArgument(format!("learning rate {}", self.learning_rate)));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Weighted mean training loss over the epoch's batches.
    pub loss: f64,
    pub seconds: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainHistory {
    pub epochs: Vec<EpochRecord>,
}

impl TrainHistory {
    pub fn loss_curve(&self) -> Vec<f64> {
        self.epochs.iter().map(|e| e.loss).collect()
    }

    pub fn final_loss(&self) -> Option<f64> {
        self.epochs.last().map(|e| e.loss)
    }

    /// Per-epoch metrics as CSV (`epoch,loss,seconds`).
    pub fn to_csv(&self) -> String {
        let mut s = String::from("epoch,loss,seconds\n");
        for e in &self.epochs {
            s.push_str(&format!("{},{:e},{:.6}\n", e.epoch, e.loss, e.seconds));
        }
        s
    }
}

/// Gradients and loss of one shard. `loss` is a weighted sum, `weight` the
/// matching sum of weights.
pub(crate) struct ShardResult {
    grads: Vec<Tensor>,
    loss: f64,
    weight: f64,
}

/// Wall-clock timer; reads zero where the platform has no clock.
pub(crate) struct Stopwatch(#[cfg(not(target_arch = "wasm32"))] std::time::Instant);

impl Stopwatch {
    pub(crate) fn start() -> Self {
        Stopwatch(
            #[cfg(not(target_arch = "wasm32"))]
            std::time::Instant::now(),
        )
    }

    pub(crate) fn seconds(&self) -> f64 {
        #[cfg(not(target_arch = "wasm32"))]
        return self.0.elapsed().as_secs_f64();
        #[cfg(target_arch = "wasm32")]
        0.0
    }
}

fn thread_pool(workers: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::InvalidArgument(format!("worker pool: {e}")))
}

fn collect_grads(tape: &Tape, vars: &[crate::numerics::Var], params: &ParamList, loss: crate::numerics::Var) -> Result<Vec<Tensor>> {
    let mut g = tape.backward(loss)?;
    Ok(vars.iter().zip(params.tensors()).map(|(&v, p)| g.take_or_zeros(v, p)).collect())
}

/// The shared mini-batch loop over `n` independent items.
pub(crate) fn drive<M, F>(model: &mut M, n: usize, cfg: &TrainConfig, shard_fn: F) -> Result<TrainHistory>
where
    M: NodeModel,
    F: Fn(&M, &[usize]) -> Result<ShardResult> + Sync,
{
    cfg.validate()?;
    if n == 0 {
        return Err(Error::InvalidArgument("empty training set".into()));
    }
    let pool = if cfg.workers > 1 { Some(thread_pool(cfg.workers)?) } else { None };
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut state = AdamState::new(model.params());
    let mut order: Vec<usize> = (0..n).collect();
    let mut history = TrainHistory::default();
    for epoch in 0..cfg.epochs {
        let start = Stopwatch::start();
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        let mut epoch_weight = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            let shard_len = batch.len().div_ceil(cfg.workers);
            let shards: Vec<&[usize]> = batch.chunks(shard_len).collect();
            let m: &M = model;
            let results: Vec<Result<ShardResult>> = match &pool {
                Some(pool) => pool.install(|| shards.par_iter().map(|s| shard_fn(m, s)).collect()),
                None => shards.iter().map(|s| shard_fn(m, s)).collect(),
            };
            let mut iter = results.into_iter();
            let mut total = iter.next().expect("at least one shard")?;
            for r in iter {
                let r = r?;
                for (a, b) in total.grads.iter_mut().zip(&r.grads) {
                    a.add_assign(b);
                }
                total.loss += r.loss;
                total.weight += r.weight;
            }
            if !total.loss.is_finite() {
                return Err(Error::Numeric(format!("non-finite loss {} in epoch {epoch}", total.loss)));
            }
            if total.weight <= 0.0 {
                continue;
            }
            for g in &mut total.grads {
                g.scale_assign(1.0 / total.weight);
            }
            adam_step(model.params_mut(), &total.grads, &mut state, cfg.learning_rate, &cfg.adam)?;
            epoch_loss += total.loss;
            epoch_weight += total.weight;
        }
        history.epochs.push(EpochRecord {
            epoch,
            loss: epoch_loss / epoch_weight,
            seconds: start.seconds(),
        });
    }
    Ok(history)
}

fn check_labels(n: usize, labels: &[usize], classes: usize) -> Result<()> {
    if labels.len() != n {
        return Err(Error::shape(format!("{} labels for {n} nodes", labels.len())));
    }
    if let Some(l) = labels.iter().find(|&&l| l >= classes) {
        return Err(Error::InvalidArgument(format!("label {l} outside 0..{classes}")));
    }
    Ok(())
}

fn class_weights(cfg: &TrainConfig, labels: &[usize], classes: usize) -> Vec<f64> {
    if cfg.class_weighting {
        inverse_frequency_weights(labels, classes)
    } else {
        vec![1.0; classes]
    }
}

/// Node classification: trains `model` in place on the rows of `hops`.
pub fn train<M: NodeModel>(model: &mut M, hops: &HopTensor, labels: &[usize], cfg: &TrainConfig) -> Result<TrainHistory> {
    if cfg.task != Task::NodeClass4 {
        return Err(Error::InvalidArgument("train expects a node-classification config".into()));
    }
    let classes = model.output_dim();
    check_labels(hops.num_nodes(), labels, classes)?;
    let weights = class_weights(cfg, labels, classes);
    drive(model, hops.num_nodes(), cfg, |m, ids| {
        let batch = hops.shard(ids)?;
        let targets: Vec<usize> = ids.iter().map(|&i| labels[i]).collect();
        let mut tape = Tape::new();
        let (vars, y) = m.forward_tape(&mut tape, &batch)?;
        let loss = tape.cross_entropy_sum(y, &targets, &weights)?;
        let grads = collect_grads(&tape, &vars, m.params(), loss)?;
        Ok(ShardResult {
            grads,
            loss: tape.value(loss).data()[0],
            weight: targets.iter().map(|&t| weights[t]).sum(),
        })
    })
}

/// Full-graph training of the GCN baseline: one Adam step per epoch.
pub fn train_gcn(model: &mut GcnModel, adj: &Arc<Csr>, x: &NodeFeatures, labels: &[usize], cfg: &TrainConfig) -> Result<TrainHistory> {
    cfg.validate()?;
    check_labels(x.num_nodes(), labels, model.config.classes)?;
    let weights = class_weights(cfg, labels, model.config.classes);
    let total_weight: f64 = labels.iter().map(|&t| weights[t]).sum();
    let mut state = AdamState::new(&model.params);
    let mut history = TrainHistory::default();
    for epoch in 0..cfg.epochs {
        let start = Stopwatch::start();
        let mut tape = Tape::new();
        let (vars, y) = model.forward_tape(&mut tape, adj, x)?;
        let loss = tape.cross_entropy_sum(y, labels, &weights)?;
        let value = tape.value(loss).data()[0];
        if !value.is_finite() {
            return Err(Error::Numeric(format!("non-finite loss {value} in epoch {epoch}")));
        }
        let mut grads = collect_grads(&tape, &vars, &model.params, loss)?;
        for g in &mut grads {
            g.scale_assign(1.0 / total_weight);
        }
        adam_step(&mut model.params, &grads, &mut state, cfg.learning_rate, &cfg.adam)?;
        history.epochs.push(EpochRecord { epoch, loss: value / total_weight, seconds: start.seconds() });
    }
    Ok(history)
}

/// Classification metrics of a hop model over every node of `hops`.
pub fn evaluate<M: NodeModel>(model: &M, hops: &HopTensor, labels: &[usize], task: Task) -> Result<Metrics> {
    if task != Task::NodeClass4 || model.output_dim() != Label::COUNT {
        return Err(Error::InvalidArgument(format!(
            "cannot evaluate a {}-output model on task {task:?}",
            model.output_dim()
        )));
    }
    check_labels(hops.num_nodes(), labels, Label::COUNT)?;
    let logits = model.predict(hops)?;
    classification_metrics(&argmax_rows(&logits), labels, Label::COUNT)
}

pub fn evaluate_gcn(model: &GcnModel, adj: &Arc<Csr>, x: &NodeFeatures, labels: &[usize]) -> Result<Metrics> {
    check_labels(x.num_nodes(), labels, model.config.classes)?;
    let logits = model.predict(adj, x)?;
    classification_metrics(&argmax_rows(&logits), labels, model.config.classes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::HogaModel;

    fn toy() -> (HopTensor, Vec<usize>) {
        let data = vec![1.0, 0.0, 0.5, 0.5, 0.0, 1.0, -0.5, 0.25];
        (HopTensor::new(2, 1, 2, data).unwrap(), vec![0, 2])
    }

    fn small_cfg() -> TrainConfig {
        TrainConfig { hops: 1, hidden_dim: 8, epochs: 200, batch_size: 2, ..TrainConfig::default() }
    }

    #[test]
    fn two_node_loss_decreases() {
        let (hops, labels) = toy();
        let cfg = small_cfg();
        let mut m = HogaModel::init(cfg.hoga_config(2), 3).unwrap();
        let h = train(&mut m, &hops, &labels, &cfg).unwrap();
        assert!(h.final_loss().unwrap() < h.epochs[0].loss);
        assert!(m.params.is_finite());
    }

    #[test]
    fn single_worker_is_reproducible() {
        let (hops, labels) = toy();
        let cfg = TrainConfig { epochs: 5, ..small_cfg() };
        let run = || {
            let mut m = HogaModel::init(cfg.hoga_config(2), 1).unwrap();
            let h = train(&mut m, &hops, &labels, &cfg).unwrap();
            (m.params, h.loss_curve())
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn mismatched_labels_rejected() {
        let (hops, _) = toy();
        let cfg = small_cfg();
        let mut m = HogaModel::init(cfg.hoga_config(2), 1).unwrap();
        assert!(train(&mut m, &hops, &[0], &cfg).is_err());
        assert!(train(&mut m, &hops, &[0, 9], &cfg).is_err());
        assert!(evaluate(&m, &hops, &[0, 1], Task::GraphRegress).is_err());
    }
}
