//! `baseline`: upsample a stream with one of the non-learned baselines
//! (identity / align-icp / flow-only). Same output layout as `interpolate`.

use std::path::PathBuf;

use anyhow::{bail, Result};
use clap::Args;

use crate::config::AppConfig;

use super::interpolate::{self, FrameFormat, InterpolateArgs};
use super::Method;

#[derive(Debug, Args)]
pub struct BaselineArgs {
    /// Input stream manifest (JSON).
    pub manifest: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub factor: usize,
    #[arg(long, value_delimiter = ',')]
    pub t_steps: Option<Vec<f64>>,
    #[arg(long, value_enum, default_value = "identity")]
    pub method: Method,
    #[arg(long, value_enum, default_value = "bin")]
    pub format: FrameFormat,
}

pub fn run(args: &BaselineArgs, cfg: &AppConfig) -> Result<()> {
    if args.method == Method::Fusion {
        bail!("`baseline` runs the non-learned methods; use `interpolate` for fusion");
    }
    let inner = InterpolateArgs {
        manifest: args.manifest.clone(),
        out: args.out.clone(),
        factor: args.factor,
        t_steps: args.t_steps.clone(),
        model: None,
        format: args.format,
        method: args.method,
    };
    interpolate::run(&inner, cfg)
}
