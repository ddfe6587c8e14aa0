//! `train`: fit the fusion network on a stream. The stream is rate-
//! downsampled; each held-out intermediate frame becomes a training sample
//! (two kept frames, the held-out target, its fractional time step).

use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::Args;
use cloudinterp::fusion::TimeStep;
use cloudinterp::train::{TrainSample, Trainer};

use crate::config::AppConfig;
use crate::io::checkpoint::Checkpoint;
use crate::io::manifest::{downsample_stream, FrameStream};
use crate::output::OutputGuard;

use super::{downsample_frame, downsample_pair};

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// High-rate stream manifest with ground-truth intermediates.
    pub manifest: PathBuf,
    /// Rate-downsampling factor used to form training gaps.
    #[arg(long, default_value_t = 5)]
    pub factor: usize,
    /// Checkpoint output path.
    #[arg(long)]
    pub out: PathBuf,
    /// Per-step loss log (CSV: step,loss).
    #[arg(long)]
    pub loss_log: Option<PathBuf>,
    /// Number of passes over the sample list (overrides config).
    #[arg(long)]
    pub epochs: Option<usize>,
    /// Resume from an existing checkpoint (with optimizer state).
    #[arg(long)]
    pub resume: Option<PathBuf>,
}

/// Builds the sample list from a stream: one sample per held-out frame of
/// every complete gap, in stream order.
pub fn build_samples(
    stream: &FrameStream,
    factor: usize,
    points: usize,
    seed: u64,
) -> Result<Vec<TrainSample>> {
    let (low, groups) = downsample_stream(stream, factor)?;
    let mut samples = Vec::new();
    for group in groups.iter().filter(|g| g.complete) {
        let i0 = group.kept_index;
        let f0_full = low.load_frame(i0)?;
        let f1_full = low.load_frame(i0 + 1)?;
        let idx0 = (i0 * factor) as u64;
        let idx1 = ((i0 + 1) * factor) as u64;
        let (f0, f1) = downsample_pair(&f0_full, &f1_full, points, seed, idx0, idx1)?;
        for held in &group.frames {
            let target_full = stream.load_frame(held.original_index)?;
            let target =
                downsample_frame(&target_full, points, seed, held.original_index as u64)?;
            samples.push(TrainSample::new(
                f0.clone(),
                f1.clone(),
                target,
                TimeStep::new(held.t)?,
            )?);
        }
    }
    if samples.is_empty() {
        bail!("stream yielded no complete training gaps");
    }
    Ok(samples)
}

pub fn run(args: &TrainArgs, cfg: &AppConfig) -> Result<()> {
    let stream = FrameStream::load(&args.manifest)?;
    let mut train_cfg = cfg.train;
    if let Some(epochs) = args.epochs {
        train_cfg.epochs = epochs;
    }
    let samples = build_samples(&stream, args.factor, cfg.points, cfg.fusion.seed)?;

    let mut trainer = match &args.resume {
        Some(path) => {
            let ckpt = Checkpoint::load(path)
                .with_context(|| format!("loading checkpoint {}", path.display()))?;
            Trainer::resume(ckpt.model, ckpt.optimizer, cfg.flow, cfg.fusion, train_cfg)?
        }
        None => Trainer::new(cfg.flow, cfg.fusion, train_cfg)?,
    };
    let start_step = trainer.step_count();
    let losses = trainer.run(&samples)?;

    let mut guard = OutputGuard::new();
    if let Some(log_path) = &args.loss_log {
        guard.track(log_path);
        let mut csv = String::from("step,loss\n");
        for (i, loss) in losses.iter().enumerate() {
            csv.push_str(&format!("{},{}\n", start_step + i as u64, loss));
        }
        std::fs::write(log_path, csv)
            .with_context(|| format!("writing {}", log_path.display()))?;
    }

    guard.track(&args.out);
    Checkpoint {
        model: trainer.model().clone(),
        optimizer: Some(trainer.optimizer_state().clone()),
        step: trainer.step_count(),
        seed: train_cfg.seed,
    }
    .save(&args.out)?;
    guard.commit();

    let first = losses.first().copied().unwrap_or(f64::NAN);
    let last = losses.last().copied().unwrap_or(f64::NAN);
    println!(
        "trained {} steps over {} samples (loss {first:.4} -> {last:.4}); checkpoint at {}",
        losses.len(),
        samples.len(),
        args.out.display()
    );
    Ok(())
}
