//! A revisit whose drift exceeds the voxel size traps the matching cost
//! factor one structure period away; an explicit loop pulls it back.

use std::sync::Arc;

use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use vgmap::cloud::{estimate_covariances, PointCloud};
use vgmap::config::PipelineConfig;
use vgmap::mapping::{CandidateSource, GlobalMapper, LoopCandidate, LoopOutcome, Recorder, Scope, Submap, SubmapFrame};
use vgmap::se3::Pose;
use vgmap::voxelmap::GaussianVoxelMap;

const PERIOD: f64 = 1.2;
const DRIFT: f64 = 1.3;

/// Ground, a featureless wall and a row of posts every `PERIOD` meters:
/// the posts fix the along-track position only up to one period.
fn periodic_street(seed: u64) -> PointCloud {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pts = Vec::new();
    for _ in 0..6000 {
        pts.push(Vector3::new(rng.random_range(-12.0..12.0), rng.random_range(-5.0..5.0), -1.77));
    }
    for _ in 0..3000 {
        pts.push(Vector3::new(rng.random_range(-12.0..12.0), -4.93, rng.random_range(-1.77..1.5)));
    }
    for k in -10..=10 {
        let x0 = k as f64 * PERIOD + 0.07;
        for _ in 0..200 {
            let h = rng.random_range(-1.77..0.0);
            let u = rng.random_range(0.0..0.3);
            let p = match rng.random_range(0..4) {
                0 => Vector3::new(x0 + u, 3.03, h),
                1 => Vector3::new(x0 + u, 3.33, h),
                2 => Vector3::new(x0, 3.03 + u, h),
                _ => Vector3::new(x0 + 0.3, 3.03 + u, h),
            };
            pts.push(p);
        }
    }
    estimate_covariances(&PointCloud::from_means(pts), 10).unwrap()
}

fn submap(id: usize, origin: Pose, seed: u64, resolution: f64) -> Submap {
    let cloud = Arc::new(periodic_street(seed));
    let map = Arc::new(GaussianVoxelMap::build(&cloud, resolution).unwrap());
    Submap {
        id,
        origin,
        frames: vec![SubmapFrame {
            index: id,
            pose: Pose::identity(),
            keyframe: true,
        }],
        cloud,
        map,
    }
}

/// Returns the final along-track error of the revisiting submap.
fn revisit(with_loop: bool, information: Option<f64>) -> (f64, Option<LoopOutcome>) {
    let mut config = PipelineConfig::default();
    if let Some(v) = information {
        config.loops.information = [v; 6];
    }
    let resolution = config.global.resolution;
    let mut mapper = GlobalMapper::new(config.global.clone(), config.loops.clone(), config.lm_settings());
    let mut rec = Recorder::default();
    // both submaps observe the same place; odometry puts the second one DRIFT meters ahead
    mapper.insert(submap(0, Pose::identity(), 1, resolution), &mut rec).unwrap();
    let drifted = Pose::from_translation(Vector3::new(DRIFT, 0.0, 0.0));
    mapper.insert(submap(1, drifted, 2, resolution), &mut rec).unwrap();
    let outcome = with_loop.then(|| {
        let candidate = LoopCandidate {
            target: 0,
            source: 1,
            initial: Some(Pose::identity()),
            origin: CandidateSource::File,
        };
        mapper.process_loop_candidate(&candidate, &mut rec).unwrap()
    });
    mapper.optimize(Scope::Final, &mut rec).unwrap();
    (mapper.poses()[1].translation.norm(), outcome)
}

#[test]
fn drift_beyond_a_voxel_is_trapped_without_a_loop() {
    let (error, _) = revisit(false, None);
    assert!(error > PERIOD * 0.5, "implicit closure unexpectedly recovered: {error}");
}

/// The loop has to outweigh the trapped matching factor, which holds
/// thousands of plane-weighted points; the default loop information does not.
const STRONG_LOOP_INFORMATION: f64 = 1e4;

#[test]
fn explicit_loop_reduces_the_error() {
    let (implicit, _) = revisit(false, None);
    let (explicit, outcome) = revisit(true, Some(STRONG_LOOP_INFORMATION));
    assert!(matches!(outcome, Some(LoopOutcome::Accepted { .. })), "{outcome:?}");
    assert!(explicit < implicit, "loop {explicit} vs implicit {implicit}");
    assert!(explicit < 0.05, "{explicit}");
}
