use serde::{Deserialize, Serialize};

use super::{train, Stopwatch, TrainConfig};
use crate::hop::HopTensor;
use crate::model::NodeModel;
use crate::Result;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub workers: usize,
    pub seconds: f64,
    pub epochs_per_sec: f64,
    /// Throughput relative to the first row.
    pub speedup: f64,
    pub final_loss: f64,
}

/// Trains a fresh copy of `model` once per worker count with otherwise
/// identical settings and records throughput.
pub fn bench_scaling<M: NodeModel + Clone>(
    model: &M,
    hops: &HopTensor,
    labels: &[usize],
    cfg: &TrainConfig,
    worker_counts: &[usize],
) -> Result<Vec<BenchRow>> {
    let mut rows: Vec<BenchRow> = Vec::with_capacity(worker_counts.len());
    for &w in worker_counts {
        let mut m = model.clone();
        let run_cfg = TrainConfig { workers: w, ..cfg.clone() };
        let start = Stopwatch::start();
        let history = train(&mut m, hops, labels, &run_cfg)?;
        let seconds = start.seconds();
        let epochs_per_sec = cfg.epochs as f64 / seconds;
        let speedup = rows.first().map_or(1.0, |r| epochs_per_sec / r.epochs_per_sec);
        rows.push(BenchRow { workers: w, seconds, epochs_per_sec, speedup, final_loss: history.final_loss().unwrap_or(f64::NAN) });
    }
    Ok(rows)
}

/// `workers,seconds,epochs_per_sec,speedup,final_loss`
pub fn bench_csv(rows: &[BenchRow]) -> String {
    let mut s = String::from("workers,seconds,epochs_per_sec,speedup,final_loss\n");
    for r in rows {
        s.push_str(&format!("{},{:.6},{:.6},{:.4},{:e}\n", r.workers, r.seconds, r.epochs_per_sec, r.speedup, r.final_loss));
    }
    s
}
