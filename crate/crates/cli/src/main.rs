//! Command-line surface for point cloud frame interpolation: stream
//! upsampling, fusion training, quantitative evaluation, baselines,
//! synthetic scenes, and stage profiling.

mod commands;
mod config;
mod io;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use cloudinterp::flow::FlowMethod;
use config::{AppConfig, Overrides};

#[derive(Debug, Parser)]
#[command(
    name = "cloudinterp",
    version,
    about = "Interpolate intermediate LiDAR point cloud frames between consecutive frames"
)]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct GlobalArgs {
    /// JSON config file; flags override file values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Global seed (sampling, model init, scene generation).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Point budget per frame.
    #[arg(long, global = true)]
    points: Option<usize>,
    /// Cluster size K.
    #[arg(long, global = true)]
    k: Option<usize>,
    /// Flow estimation method.
    #[arg(long, global = true, value_enum)]
    flow_method: Option<FlowMethodArg>,
    /// Sample N/2 from each warped cloud instead of (1-t)N / tN.
    #[arg(long = "ablate-sampling", global = true)]
    ablate_sampling: bool,
    /// Query K/2 neighbors from each warped cloud instead of (1-t)K / tK.
    #[arg(long = "ablate-knn", global = true)]
    ablate_knn: bool,
    /// Skip attentive fusion; the sampled union is the output.
    #[arg(long = "ablate-attention", global = true)]
    ablate_attention: bool,
    /// Instance size at or below which EMD is solved exactly.
    #[arg(long, global = true)]
    exact_emd_threshold: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
enum FlowMethodArg {
    RigidIcp,
    NnSmooth,
}

impl From<FlowMethodArg> for FlowMethod {
    fn from(v: FlowMethodArg) -> Self {
        match v {
            FlowMethodArg::RigidIcp => FlowMethod::RigidIcp,
            FlowMethodArg::NnSmooth => FlowMethod::NnSmooth,
        }
    }
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Upsample a frame stream by an integer factor.
    Interpolate(commands::interpolate::InterpolateArgs),
    /// Train the fusion network on a downsampled stream.
    Train(commands::train::TrainArgs),
    /// Score interpolated frames against held-out ground truth.
    Evaluate(commands::evaluate::EvaluateArgs),
    /// Upsample with a non-learned baseline (identity, align-icp, flow-only).
    Baseline(commands::baseline::BaselineArgs),
    /// Generate a synthetic stream with exact ground-truth motion.
    Synth(commands::synth::SynthArgs),
    /// Time the warping and fusion stages on one frame pair.
    Profile(commands::profile::ProfileArgs),
}

fn build_config(global: &GlobalArgs) -> anyhow::Result<AppConfig> {
    let mut cfg = match &global.config {
        Some(path) => AppConfig::load(path)?,
        None => AppConfig::default(),
    };
    cfg.apply_overrides(&Overrides {
        seed: global.seed,
        points: global.points,
        k: global.k,
        flow_method: global.flow_method.map(FlowMethod::from),
        ablate_sampling: global.ablate_sampling,
        ablate_knn: global.ablate_knn,
        ablate_attention: global.ablate_attention,
        exact_emd_threshold: global.exact_emd_threshold,
    });
    Ok(cfg)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = build_config(&cli.global).and_then(|cfg| match &cli.command {
        Command::Interpolate(args) => commands::interpolate::run(args, &cfg),
        Command::Train(args) => commands::train::run(args, &cfg),
        Command::Evaluate(args) => commands::evaluate::run(args, &cfg),
        Command::Baseline(args) => commands::baseline::run(args, &cfg),
        Command::Synth(args) => commands::synth::run(args, &cfg),
        Command::Profile(args) => commands::profile::run(args, &cfg),
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::FAILURE
        }
    }
}
