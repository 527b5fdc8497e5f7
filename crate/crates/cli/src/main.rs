//! `hoga`: generate circuits, precompute hop features, train and evaluate
//! models, export attention scores and benchmark worker scaling.
//!
//! Exit codes: 0 success, 2 usage error, 3 data error, 4 numeric failure.

mod commands;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(name = "hoga", version, about = "Hop-wise gated attention for circuit graphs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a labeled multiplier circuit.
    Gen(GenArgs),
    /// Precompute the hop-feature tensor of a graph.
    Featurize(FeaturizeArgs),
    /// Train a model and write a checkpoint plus metrics.
    Train(TrainArgs),
    /// Evaluate a checkpoint.
    Eval(EvalArgs),
    /// Export per-node readout scores for sampled nodes.
    Attn(AttnArgs),
    /// Measure training throughput across worker counts.
    Bench(BenchArgs),
}

#[derive(Clone, Copy, Debug, ValueEnum, serde::Serialize)]
enum CircuitKind {
    Csa,
}

#[derive(Clone, Copy, Debug, ValueEnum, serde::Serialize)]
enum Mode {
    Sym,
    Fanin,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, serde::Serialize)]
enum ModelArg {
    Hoga,
    Mlp,
    Gcn,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, serde::Serialize)]
enum TaskArg {
    Node,
    GraphRegress,
}

#[derive(Args, serde::Serialize)]
struct GenArgs {
    #[arg(long, value_enum, default_value_t = CircuitKind::Csa)]
    kind: CircuitKind,
    /// Operand width in bits.
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..=1024))]
    bits: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, serde::Serialize)]
struct FeaturizeArgs {
    /// Edge list, or ASCII AIGER when the name ends in `.aag`.
    #[arg(long)]
    graph: PathBuf,
    /// Number of hops K.
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    k: u64,
    #[arg(long, value_enum, default_value_t = Mode::Sym)]
    mode: Mode,
    /// Propagate with `A + I`.
    #[arg(long)]
    self_loops: bool,
    #[arg(long)]
    out: PathBuf,
}

/// Hyperparameter flags; each overrides the matching `--config` field.
#[derive(Args, Default, serde::Serialize)]
struct HyperArgs {
    /// JSON file with training settings.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    hidden: Option<usize>,
    #[arg(long)]
    layers: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Plain (unweighted) cross-entropy.
    #[arg(long)]
    no_class_weighting: bool,
    /// Divide attention logits by √d.
    #[arg(long)]
    scaled_attention: bool,
}

#[derive(Args, serde::Serialize)]
struct TrainArgs {
    #[arg(long, value_enum, default_value_t = ModelArg::Hoga)]
    model: ModelArg,
    #[arg(long, value_enum, default_value_t = TaskArg::Node)]
    task: TaskArg,
    /// Hop tensor (hoga, mlp).
    #[arg(long)]
    hops: Option<PathBuf>,
    /// Labels CSV (`node_id,label`).
    #[arg(long)]
    labels: Option<PathBuf>,
    /// Graph file (gcn; also checks the hop tensor's checksum).
    #[arg(long)]
    graph: Option<PathBuf>,
    /// Synthetic graphs for graph regression.
    #[arg(long, default_value_t = 200)]
    graphs: usize,
    /// Data-parallel workers.
    #[arg(long)]
    workers: Option<usize>,
    #[command(flatten)]
    hyper: HyperArgs,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, serde::Serialize)]
struct EvalArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long)]
    hops: Option<PathBuf>,
    #[arg(long)]
    labels: Option<PathBuf>,
    #[arg(long)]
    graph: Option<PathBuf>,
    /// Synthetic graphs for a graph-regression checkpoint.
    #[arg(long, default_value_t = 50)]
    graphs: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Metrics JSON path.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, serde::Serialize)]
struct AttnArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long)]
    hops: PathBuf,
    #[arg(long)]
    labels: PathBuf,
    /// Nodes sampled per class.
    #[arg(long, default_value_t = 100)]
    per_class: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// CSV path.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, serde::Serialize)]
struct BenchArgs {
    #[arg(long)]
    hops: Option<PathBuf>,
    #[arg(long)]
    labels: Option<PathBuf>,
    /// Generate a CSA multiplier workload of this width instead of reading files.
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..=1024))]
    bits: Option<u64>,
    /// Hops for a generated workload.
    #[arg(long, default_value_t = 8)]
    k: usize,
    /// Worker counts, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "1,2,4")]
    workers: Vec<usize>,
    #[command(flatten)]
    hyper: HyperArgs,
    /// CSV path.
    #[arg(long)]
    out: PathBuf,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Gen(a) => commands::gen(a),
        Command::Featurize(a) => commands::featurize(a),
        Command::Train(a) => commands::train(a),
        Command::Eval(a) => commands::eval(a),
        Command::Attn(a) => commands::attn(a),
        Command::Bench(a) => commands::bench(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(commands::exit_code(&e))
        }
    }
}

#[cfg(test)]
mod tests {
    use clap::CommandFactory;

    #[test]
    fn argument_definitions_are_consistent() {
        super::Cli::command().debug_assert();
    }
}
