//! `synth`: generate a synthetic frame stream with exact ground-truth
//! motion, written as .bin frames plus a JSON manifest (and the scene spec
//! for reproducibility).

use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Args, ValueEnum};
use cloudinterp::synth::{BodySpec, SceneSpec, Shape, SyntheticScene};

use crate::config::AppConfig;
use crate::io::kitti::write_kitti_bin;
use crate::io::manifest::{FrameEntry, FrameStream, Manifest, PoseJson};
use crate::output::OutputGuard;

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Output directory for frames + manifest.json + scene.json.
    #[arg(long)]
    pub out: PathBuf,
    /// Scene spec JSON; overrides --preset.
    #[arg(long)]
    pub scene: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "two-body")]
    pub preset: Preset,
    /// Number of frames to render.
    #[arg(long, default_value_t = 11)]
    pub frames: usize,
    /// Stream rate in Hz.
    #[arg(long, default_value_t = 10.0)]
    pub rate: f64,
    /// Gaussian point noise sigma in meters (presets only).
    #[arg(long)]
    pub noise: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Preset {
    /// One static box.
    Static,
    /// One box under constant translation + slow yaw.
    Rigid,
    /// A slab plus a separate body with an independent motion.
    TwoBody,
}

/// Built-in scenes; `total_points` is split across bodies.
pub fn preset_scene(preset: Preset, total_points: usize, noise: f64, seed: u64) -> SceneSpec {
    let bodies = match preset {
        Preset::Static => vec![BodySpec {
            shape: Shape::Box { extents: [6.0, 3.0, 2.0] },
            center: [0.0, 0.0, 0.0],
            points: total_points,
            linear_velocity: [0.0; 3],
            angular_velocity: 0.0,
            rotation_axis: [0.0, 0.0, 1.0],
        }],
        Preset::Rigid => vec![BodySpec {
            shape: Shape::Box { extents: [6.0, 3.0, 2.0] },
            center: [0.0, 0.0, 0.0],
            points: total_points,
            linear_velocity: [2.0, 0.8, 0.0],
            angular_velocity: 0.06,
            rotation_axis: [0.0, 0.0, 1.0],
        }],
        Preset::TwoBody => {
            let half = total_points / 2;
            vec![
                BodySpec {
                    shape: Shape::Box { extents: [8.0, 4.0, 1.5] },
                    center: [-5.0, 0.0, 0.0],
                    points: total_points - half,
                    linear_velocity: [1.5, 0.0, 0.0],
                    angular_velocity: 0.0,
                    rotation_axis: [0.0, 0.0, 1.0],
                },
                BodySpec {
                    shape: Shape::Sphere { radius: 1.5 },
                    center: [5.0, 2.0, 0.5],
                    points: half,
                    linear_velocity: [-1.0, 1.2, 0.0],
                    angular_velocity: 0.0,
                    rotation_axis: [0.0, 0.0, 1.0],
                },
            ]
        }
    };
    SceneSpec { bodies, noise_sigma: noise, seed }
}

pub fn run(args: &SynthArgs, cfg: &AppConfig) -> Result<()> {
    if args.frames < 2 {
        bail!("--frames must be >= 2");
    }
    if args.rate <= 0.0 {
        bail!("--rate must be > 0");
    }
    let spec = match &args.scene {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("reading scene {}", path.display()))?;
            serde_json::from_str::<SceneSpec>(&text)
                .with_context(|| format!("parsing scene {}", path.display()))?
        }
        None => preset_scene(
            args.preset,
            cfg.points,
            args.noise.unwrap_or(0.0),
            cfg.fusion.seed,
        ),
    };
    let scene = SyntheticScene::generate(&spec)?;

    std::fs::create_dir_all(&args.out)
        .with_context(|| format!("creating {}", args.out.display()))?;
    let mut guard = OutputGuard::new();

    let single_body = spec.bodies.len() == 1;
    let mut manifest = Manifest { rate_hz: args.rate, frames: Vec::new() };
    for k in 0..args.frames {
        let time = k as f64 / args.rate;
        let cloud = if spec.noise_sigma > 0.0 {
            scene.noisy_frame_at(time, k as u64)
        } else {
            scene.frame_at(time)
        };
        let name = format!("frame_{k:06}.bin");
        let path = args.out.join(&name);
        guard.track(&path);
        write_kitti_bin(&cloud, &path)?;
        // Pose maps this frame's coordinates into the base (t = 0) frame;
        // only well-defined when the scene is a single rigid body.
        let pose = single_body
            .then(|| PoseJson::from_transform(&scene.body_pose_at(0, time).inverse()));
        manifest.frames.push(FrameEntry { path: name, timestamp: time, pose });
    }

    let manifest_path = args.out.join("manifest.json");
    guard.track(&manifest_path);
    FrameStream { manifest, base_dir: args.out.clone() }.save(&manifest_path)?;

    let scene_path = args.out.join("scene.json");
    guard.track(&scene_path);
    std::fs::write(&scene_path, serde_json::to_string_pretty(&spec)?)
        .with_context(|| format!("writing {}", scene_path.display()))?;

    guard.commit();
    println!(
        "wrote {} frames at {} Hz to {}",
        args.frames,
        args.rate,
        args.out.display()
    );
    Ok(())
}
