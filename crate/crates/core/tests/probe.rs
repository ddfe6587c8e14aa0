//! Scratch probe for acceptance parameter tuning (removed before final).

use cloudinterp::chamfer::chamfer_distance;
use cloudinterp::flow::{baseline_align_icp, baseline_identity, FlowEstimatorConfig, FlowMethod};
use cloudinterp::fusion::{interpolate_frame, FusionConfig, TimeStep};
use cloudinterp::icp::icp_register;
use cloudinterp::model::FusionModel;
use cloudinterp::sample::derive_seed;
use cloudinterp::synth::{BodySpec, SceneSpec, Shape, SyntheticScene};
use cloudinterp::train::{TrainSample, Trainer};
use cloudinterp::{PointCloud, RigidTransform};
use nalgebra::Vector3;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

fn gaussian_cloud(rng: &mut StdRng, n: usize, sigma: f64) -> PointCloud {
    use rand_distr_shim::normal;
    PointCloud::new(
        (0..n)
            .map(|_| {
                Vector3::new(
                    normal(rng) * sigma * 1.6,
                    normal(rng) * sigma * 0.8,
                    normal(rng) * sigma * 0.4,
                )
            })
            .collect(),
    )
    .unwrap()
}

mod rand_distr_shim {
    use rand::Rng;
    pub fn normal(rng: &mut impl Rng) -> f64 {
        // Box-Muller.
        let u1: f64 = rng.gen_range(1e-12..1.0);
        let u2: f64 = rng.gen_range(0.0..1.0);
        (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
    }
}

#[test]
#[ignore]
fn probe_icp_recovery() {
    let mut rng = StdRng::seed_from_u64(0xACC7);
    let cfg = FlowEstimatorConfig {
        icp_max_iterations: 200,
        icp_convergence_eps: 1e-12,
        ..Default::default()
    };
    let mut worst_rot = 0.0f64;
    let mut worst_trans = 0.0f64;
    let mut fails = 0;
    let start = std::time::Instant::now();
    for trial in 0..100 {
        let source = gaussian_cloud(&mut rng, 2048, 3.0);
        let axis = Vector3::new(
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
        );
        let angle = rng.gen_range(0.0..20.0f64).to_radians();
        let translation = Vector3::new(
            rng.gen_range(-2.0..2.0),
            rng.gen_range(-2.0..2.0),
            rng.gen_range(-2.0..2.0),
        );
        let truth = RigidTransform::from_axis_angle(&axis, angle, translation);
        let target = source.transformed(&truth);
        let (est, _) = icp_register(&source, &target, &cfg).unwrap();
        let rot_err = est.after(&truth.inverse()).rotation_angle();
        let trans_err = (est.translation() - truth.translation()).norm();
        worst_rot = worst_rot.max(rot_err);
        worst_trans = worst_trans.max(trans_err);
        if rot_err > 1e-6 || trans_err > 1e-6 {
            fails += 1;
            println!("trial {trial}: angle {:.1} deg rot_err {rot_err:.2e} trans_err {trans_err:.2e}", angle.to_degrees());
        }
    }
    println!(
        "fails {fails}/100 worst rot {worst_rot:.2e} worst trans {worst_trans:.2e} elapsed {:?}",
        start.elapsed()
    );
}

pub fn two_body_scene(seed: u64, points: usize, noise: f64) -> SceneSpec {
    let mut rng = StdRng::seed_from_u64(derive_seed(seed, 77));
    let slab = (points * 3) / 5;
    SceneSpec {
        bodies: vec![
            BodySpec {
                shape: Shape::Box { extents: [8.0, 4.0, 1.5] },
                center: [-5.0, 0.0, 0.0],
                points: slab,
                linear_velocity: [
                    rng.gen_range(0.2..0.5),
                    0.0,
                    rng.gen_range(0.9..1.5),
                ],
                angular_velocity: 0.0,
                rotation_axis: [0.0, 0.0, 1.0],
            },
            BodySpec {
                shape: Shape::Sphere { radius: 1.5 },
                center: [5.0, 2.0, 0.5],
                points: points - slab,
                linear_velocity: [
                    rng.gen_range(-0.5..-0.2),
                    rng.gen_range(0.2..0.5),
                    rng.gen_range(-1.5..-0.9),
                ],
                angular_velocity: 0.0,
                rotation_axis: [0.0, 0.0, 1.0],
            },
        ],
        noise_sigma: noise,
        seed,
    }
}

#[test]
#[ignore]
fn probe_two_body_ordering() {
    let rate: f64 = 10.0;
    let points = 512;
    let noise = 0.03;
    let flow_cfg = FlowEstimatorConfig {
        method: FlowMethod::NnSmooth,
        nn_smooth_neighbors: 16,
        nn_smooth_iterations: 3,
        ..Default::default()
    };
    let fusion_cfg = FusionConfig { k: 32, seed: 1, ..Default::default() };

    // Train on scenes 1000..1010.
    let start = std::time::Instant::now();
    let mut samples = Vec::new();
    for s in 0..10u64 {
        let scene = SyntheticScene::generate(&two_body_scene(1000 + s, points, noise)).unwrap();
        for (k, t) in [(1usize, 0.25), (2, 0.5), (3, 0.75)] {
            samples.push(
                TrainSample::new(
                    scene.noisy_frame_at(0.0, 0),
                    scene.noisy_frame_at(4.0 / rate, 4),
                    scene.frame_at(k as f64 / rate),
                    TimeStep::new(t).unwrap(),
                )
                .unwrap(),
            );
        }
    }
    let train_cfg = cloudinterp::train::TrainConfig {
        epochs: 10,
        learning_rate: 2e-3,
        points_per_frame: points,
        seed: 9,
        ..Default::default()
    };
    let mut trainer = Trainer::new(flow_cfg, fusion_cfg, train_cfg).unwrap();
    let losses = trainer.run(&samples).unwrap();
    println!(
        "trained {} steps in {:?}; loss {:.3} -> {:.3}",
        losses.len(),
        start.elapsed(),
        losses[0],
        losses[losses.len() - 5..].iter().sum::<f64>() / 5.0
    );
    let model = trainer.model().clone();
    let untrained = FusionModel::standard(9);

    let mut win_id = 0;
    let mut win_icp = 0;
    let mut total = 0;
    let mut sum = [0.0f64; 4]; // ours, identity, align, untrained
    let eval_start = std::time::Instant::now();
    for s in 0..20u64 {
        let scene = SyntheticScene::generate(&two_body_scene(s, points, noise)).unwrap();
        let p0 = scene.noisy_frame_at(0.0, 0);
        let p1 = scene.noisy_frame_at(4.0 / rate, 4);
        for (k, t) in [(1usize, 0.25), (2, 0.5), (3, 0.75)] {
            let truth = scene.frame_at(k as f64 / rate);
            let mut cfg = fusion_cfg;
            cfg.seed = derive_seed(5, s * 4 + k as u64);
            let ts = TimeStep::new(t).unwrap();
            let ours =
                interpolate_frame(&p0, &p1, ts, &flow_cfg, &cfg, &model).unwrap();
            let untrained_out =
                interpolate_frame(&p0, &p1, ts, &flow_cfg, &cfg, &untrained).unwrap();
            let cd_ours = chamfer_distance(&ours, &truth);
            let cd_untrained = chamfer_distance(&untrained_out, &truth);
            let cd_id = chamfer_distance(&baseline_identity(&p0), &truth);
            let cd_icp =
                chamfer_distance(&baseline_align_icp(&p0, &p1, t, &flow_cfg).unwrap(), &truth);
            sum[0] += cd_ours;
            sum[1] += cd_id;
            sum[2] += cd_icp;
            sum[3] += cd_untrained;
            total += 1;
            if cd_ours < cd_id {
                win_id += 1;
            }
            if cd_ours <= cd_icp {
                win_icp += 1;
            }
        }
    }
    println!(
        "eval {:?}: ours<identity {win_id}/{total}, ours<=align {win_icp}/{total}",
        eval_start.elapsed()
    );
    println!(
        "mean CD ours {:.4} identity {:.4} align {:.4} untrained {:.4}",
        sum[0] / total as f64,
        sum[1] / total as f64,
        sum[2] / total as f64,
        sum[3] / total as f64
    );
}
