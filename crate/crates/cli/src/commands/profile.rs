//! `profile`: wall-clock timing of the two pipeline stages (warping,
//! fusion) on one synthetic frame pair at the configured point budget.

use std::path::PathBuf;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::Args;
use cloudinterp::fusion::{fusion_stage, warp_stage, TimeStep};
use serde::Serialize;

use crate::config::AppConfig;

use super::load_model_or_default;
use super::synth::{preset_scene, Preset};

#[derive(Debug, Args)]
pub struct ProfileArgs {
    /// Time step profiled.
    #[arg(long, default_value_t = 0.5)]
    pub t: f64,
    /// Fusion model checkpoint; seeded untrained model when absent.
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Repetitions averaged over.
    #[arg(long, default_value_t = 1)]
    pub repeat: usize,
    /// JSON report path (the table always goes to stdout).
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Serialize)]
pub struct ProfileReport {
    pub points: usize,
    pub k: usize,
    pub t: f64,
    pub repeat: usize,
    pub warping_ms: f64,
    pub fusion_ms: f64,
    pub total_ms: f64,
}

pub fn run(args: &ProfileArgs, cfg: &AppConfig) -> Result<()> {
    if args.repeat == 0 {
        bail!("--repeat must be >= 1");
    }
    let t = TimeStep::new(args.t)?;
    let model = load_model_or_default(args.model.as_deref(), cfg.train.seed)?;

    // A rigid scene keeps the flow estimator on its default (ICP) path.
    let spec = preset_scene(Preset::Rigid, cfg.points, 0.0, cfg.fusion.seed);
    let scene = cloudinterp::synth::SyntheticScene::generate(&spec)?;
    let p0 = scene.frame_at(0.0);
    let p1 = scene.frame_at(0.1);

    let mut warping_ms = 0.0;
    let mut fusion_ms = 0.0;
    for _ in 0..args.repeat {
        let start = Instant::now();
        let (w0, w1) = warp_stage(&p0, &p1, t, &cfg.flow)?;
        warping_ms += start.elapsed().as_secs_f64() * 1e3;

        let start = Instant::now();
        let fused = fusion_stage(&w0, &w1, t, &cfg.fusion, &model)?;
        fusion_ms += start.elapsed().as_secs_f64() * 1e3;
        assert_eq!(fused.len(), p0.len());
    }
    warping_ms /= args.repeat as f64;
    fusion_ms /= args.repeat as f64;

    let report = ProfileReport {
        points: p0.len(),
        k: cfg.fusion.k,
        t: args.t,
        repeat: args.repeat,
        warping_ms,
        fusion_ms,
        total_ms: warping_ms + fusion_ms,
    };

    println!("stage      ms");
    println!("warping    {:10.1}", report.warping_ms);
    println!("fusion     {:10.1}", report.fusion_ms);
    println!("total      {:10.1}", report.total_ms);
    println!("({} points, K = {}, t = {})", report.points, report.k, report.t);

    if let Some(path) = &args.report {
        std::fs::write(path, serde_json::to_string_pretty(&report)?)
            .with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(())
}
