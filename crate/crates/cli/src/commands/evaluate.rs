//! `evaluate`: rate-downsample a ground-truth stream, re-interpolate the
//! held-out frames with the chosen method, and score the estimates with
//! CD/EMD plus the keypoint-repeatability and multi-frame-ICP applications.

use std::collections::BTreeMap;
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Args, ValueEnum};
use cloudinterp::assignment::emd;
use cloudinterp::chamfer::chamfer_distance;
use cloudinterp::eval::{multi_frame_icp, pose_error, PoseErrorReport, RepeatabilityReport};
use cloudinterp::keypoints::{detect_iss_keypoints, repeatability};
use cloudinterp::sample::derive_seed;
use cloudinterp::{PointCloud, RigidTransform};
use serde::Serialize;

use crate::config::AppConfig;
use crate::io::manifest::{downsample_stream, FrameStream};

use super::{downsample_frame, downsample_pair, load_model_or_default, Method};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MetricChoice {
    Cd,
    Emd,
    All,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum AppChoice {
    Keypoints,
    Icp,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// High-rate ground-truth stream manifest.
    pub manifest: PathBuf,
    #[arg(long, default_value_t = 5)]
    pub factor: usize,
    #[arg(long, value_enum, default_value = "fusion")]
    pub method: Method,
    /// Fusion model checkpoint (fusion method only).
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "cd")]
    pub metric: MetricChoice,
    /// Applications to run (comma separated): keypoints, icp.
    #[arg(long, value_enum, value_delimiter = ',')]
    pub apps: Vec<AppChoice>,
    /// Report output path; stdout when omitted.
    #[arg(long)]
    pub report: Option<PathBuf>,
    /// Frames accumulated by the multi-frame ICP application.
    #[arg(long, default_value_t = 10)]
    pub icp_frames: usize,
    /// Half-width of the repeatability comparison window.
    #[arg(long, default_value_t = 5)]
    pub keypoint_window: usize,
    /// Repeatability distance threshold, meters.
    #[arg(long, default_value_t = 0.5)]
    pub keypoint_threshold: f64,
}

#[derive(Debug, Serialize)]
pub struct MetricSummary {
    pub mean: f64,
    pub per_t: BTreeMap<String, f64>,
}

#[derive(Debug, Serialize)]
pub struct EmdSummary {
    pub mean: f64,
    pub per_t: BTreeMap<String, f64>,
    /// Largest suboptimality bound among approximate solves; absent when
    /// every instance was solved exactly.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
}

#[derive(Debug, Serialize)]
pub struct RepeatabilityPair {
    pub original: RepeatabilityReport,
    pub interpolated: RepeatabilityReport,
    pub difference: f64,
}

#[derive(Debug, Serialize)]
pub struct PoseErrorPair {
    pub original: PoseErrorReport,
    pub interpolated: PoseErrorReport,
    pub rte_difference: f64,
    pub rre_difference_deg: f64,
}

#[derive(Debug, Serialize)]
pub struct EvalReport {
    pub method: String,
    pub factor: usize,
    pub gaps: usize,
    pub frames_evaluated: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cd: Option<MetricSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub emd: Option<EmdSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub repeatability: Option<RepeatabilityPair>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pose_error: Option<PoseErrorPair>,
}

fn summarize(values: &[(f64, f64)]) -> MetricSummary {
    let mean = values.iter().map(|&(_, v)| v).sum::<f64>() / values.len() as f64;
    let mut per_t: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for &(t, v) in values {
        per_t.entry(format!("{t:.3}")).or_default().push(v);
    }
    MetricSummary {
        mean,
        per_t: per_t
            .into_iter()
            .map(|(k, vs)| {
                let m = vs.iter().sum::<f64>() / vs.len() as f64;
                (k, m)
            })
            .collect(),
    }
}

pub fn run(args: &EvaluateArgs, cfg: &AppConfig) -> Result<()> {
    let stream = FrameStream::load(&args.manifest)?;
    let (low, groups) = downsample_stream(&stream, args.factor)?;
    let model = load_model_or_default(args.model.as_deref(), cfg.train.seed)?;
    let seed = cfg.fusion.seed;
    let want_cd = matches!(args.metric, MetricChoice::Cd | MetricChoice::All);
    let want_emd = matches!(args.metric, MetricChoice::Emd | MetricChoice::All);

    let mut cd_values: Vec<(f64, f64)> = Vec::new();
    let mut emd_values: Vec<(f64, f64)> = Vec::new();
    let mut emd_epsilon: Option<f64> = None;
    // Estimates stored by original stream slot for the applications.
    let mut estimates: BTreeMap<usize, PointCloud> = BTreeMap::new();
    let mut gaps = 0usize;
    let mut frames_evaluated = 0usize;

    for group in groups.iter().filter(|g| g.complete) {
        gaps += 1;
        let i0 = group.kept_index;
        let f0_full = low.load_frame(i0)?;
        let f1_full = low.load_frame(i0 + 1)?;
        let orig0 = (i0 * args.factor) as u64;
        let orig1 = ((i0 + 1) * args.factor) as u64;
        let (p0, p1) = downsample_pair(&f0_full, &f1_full, cfg.points, seed, orig0, orig1)?;
        let mut fusion_cfg = cfg.fusion;
        fusion_cfg.seed = derive_seed(seed, orig0);

        for held in &group.frames {
            let target_full = stream.load_frame(held.original_index)?;
            let target =
                downsample_frame(&target_full, cfg.points, seed, held.original_index as u64)?;
            let estimate =
                args.method.estimate(&p0, &p1, held.t, &cfg.flow, &fusion_cfg, &model)?;
            frames_evaluated += 1;
            if want_cd {
                cd_values.push((held.t, chamfer_distance(&estimate, &target)));
            }
            if want_emd {
                // EMD needs equal sizes; trim the larger side deterministically.
                let n = estimate.len().min(target.len());
                let a = downsample_frame(&estimate, n, seed, held.original_index as u64)?;
                let b = downsample_frame(&target, n, seed, held.original_index as u64)?;
                let r = emd(&a, &b, cfg.exact_emd_threshold)?;
                emd_values.push((held.t, r.cost));
                if let Some(e) = r.epsilon {
                    emd_epsilon = Some(emd_epsilon.map_or(e, |cur: f64| cur.max(e)));
                }
            }
            estimates.insert(held.original_index, estimate);
        }
    }
    if frames_evaluated == 0 {
        bail!("no complete gaps to evaluate");
    }

    let mut report = EvalReport {
        method: args.method.name().to_string(),
        factor: args.factor,
        gaps,
        frames_evaluated,
        cd: want_cd.then(|| summarize(&cd_values)),
        emd: want_emd.then(|| {
            let s = summarize(&emd_values);
            EmdSummary { mean: s.mean, per_t: s.per_t, epsilon: emd_epsilon }
        }),
        repeatability: None,
        pose_error: None,
    };

    if !args.apps.is_empty() {
        if !stream.manifest.has_poses() {
            bail!("applications need ground-truth poses in the manifest");
        }
        // Contiguous original-rate prefix covered by kept frames and
        // complete-gap estimates.
        let last_kept_original = ((low.len() - 1) * args.factor).min(stream.len() - 1);
        let mut originals: Vec<PointCloud> = Vec::new();
        let mut interpolated: Vec<PointCloud> = Vec::new();
        let mut poses: Vec<RigidTransform> = Vec::new();
        for i in 0..=last_kept_original {
            let full = stream.load_frame(i)?;
            let down = downsample_frame(&full, cfg.points, seed, i as u64)?;
            poses.push(stream.pose(i)?.expect("pose presence validated"));
            interpolated.push(match estimates.get(&i) {
                Some(est) => est.clone(),
                None => down.clone(),
            });
            originals.push(down);
        }

        for app in &args.apps {
            match app {
                AppChoice::Keypoints => {
                    let window = args.keypoint_window;
                    let original = stream_repeatability(
                        &originals,
                        &poses,
                        window,
                        args.keypoint_threshold,
                        cfg,
                    )?;
                    let interp = stream_repeatability(
                        &interpolated,
                        &poses,
                        window,
                        args.keypoint_threshold,
                        cfg,
                    )?;
                    let difference = original.repeatability - interp.repeatability;
                    report.repeatability =
                        Some(RepeatabilityPair { original, interpolated: interp, difference });
                }
                AppChoice::Icp => {
                    let n = args.icp_frames;
                    if n < 2 || n > originals.len() {
                        bail!(
                            "--icp-frames {n} outside the usable range 2..={}",
                            originals.len()
                        );
                    }
                    let t_gt = poses[n - 1].inverse().after(&poses[0]);
                    let t_orig = multi_frame_icp(&originals[..n], &cfg.flow)?;
                    let t_interp = multi_frame_icp(&interpolated[..n], &cfg.flow)?;
                    let original = pose_error(&t_orig, &t_gt, n);
                    let interp = pose_error(&t_interp, &t_gt, n);
                    report.pose_error = Some(PoseErrorPair {
                        rte_difference: interp.rte - original.rte,
                        rre_difference_deg: interp.rre_deg - original.rre_deg,
                        original,
                        interpolated: interp,
                    });
                }
            }
        }
    }

    let text = serde_json::to_string_pretty(&report)?;
    match &args.report {
        Some(path) => {
            std::fs::write(path, &text)
                .with_context(|| format!("writing {}", path.display()))?;
            println!("report written to {}", path.display());
        }
        None => println!("{text}"),
    }
    Ok(())
}

/// Mean repeatability of each frame's keypoints against the frames in a
/// window around it, all aligned through the ground-truth poses.
fn stream_repeatability(
    frames: &[PointCloud],
    poses: &[RigidTransform],
    window: usize,
    threshold: f64,
    cfg: &AppConfig,
) -> Result<RepeatabilityReport> {
    let keypoints: Vec<_> = frames
        .iter()
        .map(|f| detect_iss_keypoints(f, &cfg.iss))
        .collect::<cloudinterp::Result<_>>()?;
    let clouds: Vec<Option<PointCloud>> =
        keypoints.iter().zip(frames).map(|(k, f)| k.to_cloud(f)).collect();

    let mut truncated = keypoints.iter().any(|k| k.truncated);
    let mut total = 0.0;
    let mut pairs = 0usize;
    for i in 0..frames.len() {
        let lo = i.saturating_sub(window);
        let hi = (i + window).min(frames.len() - 1);
        if hi - lo < 2 * window {
            truncated = true; // window clipped at the stream boundary
        }
        let Some(kp_i) = &clouds[i] else { continue };
        for j in lo..=hi {
            if j == i {
                continue;
            }
            let Some(kp_j) = &clouds[j] else { continue };
            // Map frame-j keypoints into frame i through the reference.
            let t = poses[i].inverse().after(&poses[j]);
            total += repeatability(kp_i, kp_j, &t, threshold);
            pairs += 1;
        }
    }
    if pairs == 0 {
        bail!("no keypoint pairs survived detection; repeatability undefined");
    }
    Ok(RepeatabilityReport {
        detector: "iss".to_string(),
        keypoint_count: cfg.iss.keypoint_count,
        threshold,
        repeatability: total / pairs as f64,
        truncated,
    })
}
