//! Graph-level regression: mean-pooled HOGA node embeddings feed a scalar
//! head. The synthetic target is the number of AND gates that remain once
//! logic not reaching any output is swept away.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{collect_grads, drive, mape, Metrics, ShardResult, Task, TrainConfig, TrainHistory};
use crate::circuit::{live_gate_count, random_aig};
use crate::graph::AdjacencyMode;
use crate::hop::{featurize, HopTensor};
use crate::model::{Head, HogaModel, NodeModel};
use crate::numerics::{Tape, Var};
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct RegressionSample {
    pub hops: HopTensor,
    pub target: f64,
}

/// `count` random AIGs with 4..=12 inputs, 10..=120 gates and 1..=6
/// outputs, featurized with symmetric propagation.
pub fn regression_dataset(count: usize, hops: usize, seed: u64) -> Result<Vec<RegressionSample>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let inputs = rng.gen_range(4..=12);
        let gates = rng.gen_range(10..=120);
        let outputs = rng.gen_range(1..=6);
        let g = random_aig(inputs, gates, outputs, &mut rng)?;
        let live = live_gate_count(&g);
        if live == 0 {
            continue;
        }
        out.push(RegressionSample { hops: featurize(&g, AdjacencyMode::SymmetricUndirected, hops)?, target: live as f64 });
    }
    Ok(out)
}

/// HOGA with a regressor head. Predictions are `target_scale · head(mean_i y_i)`.
#[derive(Clone, Debug, PartialEq)]
pub struct GraphRegressor {
    pub model: HogaModel,
    pub target_scale: f64,
}

impl GraphRegressor {
    /// `target_scale` is the mean training target, so the head starts near
    /// the right magnitude.
    pub fn new(model: HogaModel, samples: &[RegressionSample]) -> Result<Self> {
        if model.config.head != Head::Regressor {
            return Err(Error::InvalidArgument("graph regression needs a regressor head".into()));
        }
        if samples.is_empty() {
            return Err(Error::InvalidArgument("empty regression set".into()));
        }
        let target_scale = samples.iter().map(|s| s.target).sum::<f64>() / samples.len() as f64;
        Ok(GraphRegressor { model, target_scale })
    }

    fn record(model: &HogaModel, tape: &mut Tape, hops: &HopTensor) -> Result<(Vec<Var>, Var)> {
        let vars = model.embed_tape(tape, hops)?;
        let pooled = tape.mean_rows(vars.embedding);
        let y = model.head_tape(tape, &vars.params, pooled)?;
        Ok((vars.params, y))
    }

    pub fn predict(&self, hops: &HopTensor) -> Result<f64> {
        let mut tape = Tape::new();
        let (_, y) = Self::record(&self.model, &mut tape, hops)?;
        Ok(self.target_scale * tape.value(y).data()[0])
    }

    /// Minimizes the mean squared relative error over the samples.
    pub fn train(&mut self, samples: &[RegressionSample], cfg: &TrainConfig) -> Result<TrainHistory> {
        if cfg.task != Task::GraphRegress {
            return Err(Error::InvalidArgument("graph regression expects a GraphRegress config".into()));
        }
        let scale = self.target_scale;
        drive(&mut self.model, samples.len(), cfg, |m, ids| {
            let params = m.params();
            let mut grads: Option<Vec<crate::numerics::Tensor>> = None;
            let mut loss = 0.0;
            for &i in ids {
                let mut tape = Tape::new();
                let (vars, y) = Self::record(m, &mut tape, &samples[i].hops)?;
                let l = tape.squared_rel_error_sum(y, &[samples[i].target / scale])?;
                loss += tape.value(l).data()[0];
                let g = collect_grads(&tape, &vars, params, l)?;
                match &mut grads {
                    None => grads = Some(g),
                    Some(acc) => acc.iter_mut().zip(&g).for_each(|(a, b)| a.add_assign(b)),
                }
            }
            let grads = grads.ok_or_else(|| Error::InvalidArgument("empty shard".into()))?;
            Ok(ShardResult { grads, loss, weight: ids.len() as f64 })
        })
    }

    pub fn evaluate(&self, samples: &[RegressionSample]) -> Result<Metrics> {
        let pred = samples.iter().map(|s| self.predict(&s.hops)).collect::<Result<Vec<_>>>()?;
        let truth: Vec<f64> = samples.iter().map(|s| s.target).collect();
        Ok(Metrics { mape: Some(mape(&pred, &truth)?), ..Metrics::default() })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn regression_loss_drops() {
        let data = regression_dataset(12, 2, 4).unwrap();
        assert!(data.iter().all(|s| s.target > 0.0));
        let cfg = TrainConfig { hops: 2, hidden_dim: 8, epochs: 30, learning_rate: 1e-2, batch_size: 4, ..TrainConfig::regression() };
        let model = HogaModel::init(cfg.hoga_config(data[0].hops.dim()), 2).unwrap();
        let mut r = GraphRegressor::new(model, &data).unwrap();
        let before = r.evaluate(&data).unwrap().mape.unwrap();
        let h = r.train(&data, &cfg).unwrap();
        assert!(h.final_loss().unwrap() < h.epochs[0].loss);
        let after = r.evaluate(&data).unwrap().mape.unwrap();
        assert!(after < before, "MAPE {before} -> {after}");
    }
}
