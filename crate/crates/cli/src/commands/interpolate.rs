//! `interpolate`: upsample a frame stream by an integer factor, writing the
//! original frames plus the fused intermediate frames into a new stream.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, ValueEnum};
use cloudinterp::sample::derive_seed;
use cloudinterp::PointCloud;

use crate::config::AppConfig;
use crate::io::kitti::write_kitti_bin;
use crate::io::manifest::{FrameEntry, FrameStream, Manifest, PoseJson};
use crate::io::ply::{write_ply, PlyMode};
use crate::output::OutputGuard;

use super::{downsample_pair, load_model_or_default, Method};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FrameFormat {
    Bin,
    Ply,
    PlyAscii,
}

impl FrameFormat {
    fn extension(&self) -> &'static str {
        match self {
            FrameFormat::Bin => "bin",
            FrameFormat::Ply | FrameFormat::PlyAscii => "ply",
        }
    }
}

#[derive(Debug, Args)]
pub struct InterpolateArgs {
    /// Input stream manifest (JSON).
    pub manifest: PathBuf,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    /// Upsampling factor; inserts factor-1 frames per gap.
    #[arg(long)]
    pub factor: usize,
    /// Explicit time steps in (0,1); must hold factor-1 increasing values.
    /// Defaults to k/factor.
    #[arg(long, value_delimiter = ',')]
    pub t_steps: Option<Vec<f64>>,
    /// Fusion model checkpoint; a seeded untrained model is used if absent.
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "bin")]
    pub format: FrameFormat,
    /// Interpolation method (the baselines are also reachable here).
    #[arg(long, value_enum, default_value = "fusion")]
    pub method: Method,
}

pub fn resolve_t_steps(factor: usize, explicit: Option<&[f64]>) -> Result<Vec<f64>> {
    if factor < 2 {
        bail!("--factor must be >= 2");
    }
    match explicit {
        None => Ok((1..factor).map(|k| k as f64 / factor as f64).collect()),
        Some(steps) => {
            if steps.len() != factor - 1 {
                bail!(
                    "--t-steps must list exactly factor-1 = {} values, got {}",
                    factor - 1,
                    steps.len()
                );
            }
            for pair in steps.windows(2) {
                if pair[1] <= pair[0] {
                    bail!("--t-steps must be strictly increasing");
                }
            }
            if steps.iter().any(|&t| !(0.0..=1.0).contains(&t)) {
                bail!("--t-steps must lie in [0, 1]");
            }
            Ok(steps.to_vec())
        }
    }
}

fn write_frame(
    cloud: &PointCloud,
    path: &Path,
    format: FrameFormat,
) -> crate::io::Result<()> {
    match format {
        FrameFormat::Bin => write_kitti_bin(cloud, path),
        FrameFormat::Ply => write_ply(cloud, path, PlyMode::BinaryLittleEndian),
        FrameFormat::PlyAscii => write_ply(cloud, path, PlyMode::Ascii),
    }
}

pub fn run(args: &InterpolateArgs, cfg: &AppConfig) -> Result<()> {
    let stream = FrameStream::load(&args.manifest)?;
    let t_steps = resolve_t_steps(args.factor, args.t_steps.as_deref())?;
    let model = load_model_or_default(args.model.as_deref(), cfg.train.seed)?;
    let seed = cfg.fusion.seed;

    std::fs::create_dir_all(&args.out)
        .with_context(|| format!("creating {}", args.out.display()))?;
    let mut guard = OutputGuard::new();
    let mut out_manifest =
        Manifest { rate_hz: stream.manifest.rate_hz * args.factor as f64, frames: Vec::new() };

    for gap in 0..stream.len() {
        let entry = &stream.manifest.frames[gap];
        let p0_full = stream.load_frame(gap)?;
        emit(
            &p0_full,
            entry.timestamp,
            entry.pose.clone(),
            args,
            &mut guard,
            &mut out_manifest,
        )?;
        if gap + 1 >= stream.len() {
            break;
        }
        let next = &stream.manifest.frames[gap + 1];
        let p1_full = stream.load_frame(gap + 1)?;
        let (p0, p1) =
            downsample_pair(&p0_full, &p1_full, cfg.points, seed, gap as u64, gap as u64 + 1)?;

        // Pose interpolation along the gap when ground truth is available.
        let pose_pair = match (&entry.pose, &next.pose) {
            (Some(a), Some(b)) => Some((a.to_transform()?, b.to_transform()?)),
            _ => None,
        };

        let mut fusion_cfg = cfg.fusion;
        fusion_cfg.seed = derive_seed(seed, gap as u64);
        for &t in &t_steps {
            let cloud = args.method.estimate(&p0, &p1, t, &cfg.flow, &fusion_cfg, &model)?;
            let timestamp = entry.timestamp + t * (next.timestamp - entry.timestamp);
            let pose = match &pose_pair {
                Some((a, b)) => {
                    let step = b.after(&a.inverse()).interpolate(t)?;
                    Some(PoseJson::from_transform(&step.after(a)))
                }
                None => None,
            };
            emit(&cloud, timestamp, pose, args, &mut guard, &mut out_manifest)?;
        }
    }

    let total = out_manifest.frames.len();
    let manifest_path = args.out.join("manifest.json");
    guard.track(&manifest_path);
    FrameStream { manifest: out_manifest, base_dir: args.out.clone() }.save(&manifest_path)?;
    guard.commit();
    println!(
        "interpolated {} -> {} frames ({}x) into {}",
        stream.len(),
        total,
        args.factor,
        args.out.display()
    );
    Ok(())
}

fn emit(
    cloud: &PointCloud,
    timestamp: f64,
    pose: Option<PoseJson>,
    args: &InterpolateArgs,
    guard: &mut OutputGuard,
    out_manifest: &mut Manifest,
) -> Result<()> {
    let name = format!("frame_{:06}.{}", out_manifest.frames.len(), args.format.extension());
    let path = args.out.join(&name);
    guard.track(&path);
    write_frame(cloud, &path, args.format)?;
    out_manifest.frames.push(FrameEntry { path: name, timestamp, pose });
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_steps_are_uniform() {
        assert_eq!(resolve_t_steps(4, None).unwrap(), vec![0.25, 0.5, 0.75]);
        assert_eq!(resolve_t_steps(2, None).unwrap(), vec![0.5]);
    }

    #[test]
    fn explicit_steps_are_validated() {
        assert!(resolve_t_steps(4, Some(&[0.25, 0.5])).is_err());
        assert!(resolve_t_steps(3, Some(&[0.5, 0.25])).is_err());
        assert!(resolve_t_steps(3, Some(&[0.4, 1.5])).is_err());
        assert_eq!(resolve_t_steps(3, Some(&[0.3, 0.7])).unwrap(), vec![0.3, 0.7]);
    }

    #[test]
    fn factor_one_rejected() {
        assert!(resolve_t_steps(1, None).is_err());
    }
}
