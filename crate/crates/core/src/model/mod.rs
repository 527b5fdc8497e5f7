//! HOGA and the two baselines it is compared against.
//!
//! * [`HogaModel`]: input projection, gated self-attention over each node's
//!   hop rows, attentive readout, task head.
//! * [`HopMlpModel`]: the hop rows flattened into one vector and fed to a
//!   two-layer MLP (SIGN style).
//! * [`GcnModel`]: a message-passing GCN over the whole graph.
//!
//! HOGA and the hop MLP implement [`NodeModel`]: their output for a node
//! depends on that node's hop block alone.

mod baselines;
mod checkpoint;
mod hoga;
mod params;

pub use baselines::{GcnConfig, GcnModel, HopMlpConfig, HopMlpModel};
pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint, ModelKind};
pub use hoga::{AttentionReport, Head, HogaConfig, HogaModel, HogaOutput, LayerTrace};
pub use params::ParamList;

use crate::hop::HopTensor;
use crate::numerics::{Tape, Var};
use crate::Result;

/// A model whose per-node output depends only on that node's hop block.
pub trait NodeModel: Sync {
    fn params(&self) -> &ParamList;

    fn params_mut(&mut self) -> &mut ParamList;

    /// Records the forward pass of `batch` on `tape`. Returns the parameter
    /// variables (in [`ParamList`] order) and the `B × outputs` result.
    fn forward_tape(&self, tape: &mut Tape, batch: &HopTensor) -> Result<(Vec<Var>, Var)>;

    fn output_dim(&self) -> usize;

    /// Batched inference; nodes are processed in chunks to bound memory.
    fn predict(&self, hops: &HopTensor) -> Result<crate::numerics::Tensor> {
        const CHUNK: usize = 1024;
        let n = hops.num_nodes();
        let c = self.output_dim();
        let mut out = Vec::with_capacity(n * c);
        let ids: Vec<usize> = (0..n).collect();
        for chunk in ids.chunks(CHUNK) {
            let batch = hops.shard(chunk)?;
            let mut tape = Tape::new();
            let (_, y) = self.forward_tape(&mut tape, &batch)?;
            out.extend_from_slice(tape.value(y).data());
        }
        crate::numerics::Tensor::new(vec![n, c], out)
    }
}

/// Glorot/Xavier uniform bound `√(6 / (fan_in + fan_out))`.
pub fn glorot_bound(fan_in: usize, fan_out: usize) -> f64 {
    (6.0 / (fan_in + fan_out) as f64).sqrt()
}
