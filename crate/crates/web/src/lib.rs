//! Browser bindings: the shifted Tukey kernel, the voxel overlap rate, and a
//! two-pose registration with one matching cost factor between two submaps.

use std::sync::Arc;

use nalgebra::Vector3;
use wasm_bindgen::prelude::*;

use vgmap::cloud::{estimate_covariances, voxel_downsample, PointCloud};
use vgmap::config::PipelineConfig;
use vgmap::factors::MatchingCostFactor;
use vgmap::graph::{optimize, LmSettings, MappingGraph};
use vgmap::kernel::shifted_tukey;
use vgmap::se3::Pose;
use vgmap::synthetic::{generate_synthetic_sequence, ScanModel, SyntheticSceneSpec, TrajectoryShape};
use vgmap::voxelmap::{overlap_rate, GaussianVoxelMap};

/// Frames per submap and the spacing between frames in meters.
const SUBMAP_FRAMES: usize = 5;
const FRAME_STEP: f64 = 1.0;
const MAX_DRAWN_POINTS: usize = 4000;

/// Kernel weight at `samples + 1` evenly spaced residual norms in `[0, x_max]`.
#[wasm_bindgen]
pub fn tukey_weights(width: f64, offset: f64, x_max: f64, samples: usize) -> Vec<f64> {
    let n = samples.max(1);
    (0..=n)
        .map(|k| shifted_tukey(x_max * k as f64 / n as f64, width, offset))
        .collect()
}

/// Two consecutive synthetic submaps: the first is the voxelized target, the
/// second the source placed by a user-controlled guess.
#[wasm_bindgen]
pub struct Scene {
    target: Arc<PointCloud>,
    source: Arc<PointCloud>,
    map: Arc<GaussianVoxelMap>,
    truth: Pose,
}

#[wasm_bindgen(getter_with_clone)]
pub struct Registration {
    /// Graph error after every LM iteration, starting with the initial error.
    pub errors: Vec<f64>,
    pub iterations: usize,
    pub translation_error: f64,
    pub rotation_error_deg: f64,
    pub initial_overlap: f64,
    pub final_overlap: f64,
    /// Interleaved `x, y` of the source points at the estimate.
    pub source_xy: Vec<f32>,
}

fn planar_xy(cloud: &PointCloud, pose: &Pose) -> Vec<f32> {
    let stride = cloud.len().div_ceil(MAX_DRAWN_POINTS).max(1);
    cloud
        .points
        .iter()
        .step_by(stride)
        .flat_map(|p| {
            let q = pose.transform_point(&p.mean);
            [q.x as f32, q.y as f32]
        })
        .collect()
}

impl Scene {
    pub fn build(seed: u64, resolution: f64) -> vgmap::Result<Scene> {
        let spec = SyntheticSceneSpec {
            shape: TrajectoryShape::Line,
            frames: 2 * SUBMAP_FRAMES,
            size: (2 * SUBMAP_FRAMES - 1) as f64 * FRAME_STEP,
            seed,
            scan: ScanModel {
                points_per_ring: 180,
                ..ScanModel::default()
            },
            ..SyntheticSceneSpec::default()
        };
        let seq = generate_synthetic_sequence(&spec)?;
        let config = PipelineConfig::default().preprocess;
        // frames of each half in the frame of its first scan
        let submap = |first: usize| {
            let origin = seq.ground_truth[first].inverse();
            let means = (first..first + SUBMAP_FRAMES).flat_map(|k| {
                let pose = origin.compose(&seq.ground_truth[k]);
                seq.scans[k].points.iter().map(move |p| pose.transform_point(&p.mean)).collect::<Vec<_>>()
            });
            let cloud = voxel_downsample(&PointCloud::from_means(means), config.downsample);
            estimate_covariances(&cloud, config.covariance_neighbors).map(Arc::new)
        };
        let target = submap(0)?;
        let source = submap(SUBMAP_FRAMES)?;
        let map = Arc::new(GaussianVoxelMap::build(&target, resolution)?);
        Ok(Scene {
            target,
            source,
            map,
            truth: seq.ground_truth[0].between(&seq.ground_truth[SUBMAP_FRAMES]),
        })
    }

    /// The true relative pose moved by a planar offset in the target frame.
    pub fn guess(&self, dx: f64, dy: f64, yaw_deg: f64) -> Pose {
        Pose::from_yaw(yaw_deg.to_radians(), Vector3::new(dx, dy, 0.0)).compose(&self.truth)
    }

    pub fn run_registration(&self, dx: f64, dy: f64, yaw_deg: f64) -> vgmap::Result<Registration> {
        let initial = self.guess(dx, dy, yaw_deg);
        let mut graph = MappingGraph::new();
        graph.add_variable(Pose::identity(), true);
        graph.add_variable(initial, false);
        graph.add_matching_factor(MatchingCostFactor::new(0, 1, self.source.clone(), self.map.clone()))?;
        let report = optimize(&mut graph, &LmSettings::default())?;
        let estimate = *graph.pose(1);
        let err = self.truth.between(&estimate);
        let mut errors = vec![report.initial_error];
        errors.extend(report.trace.iter().map(|t| t.error));
        Ok(Registration {
            errors,
            iterations: report.iterations,
            translation_error: err.translation.norm(),
            rotation_error_deg: err.rotation_angle().to_degrees(),
            initial_overlap: overlap_rate(&self.source, &initial, &self.map),
            final_overlap: overlap_rate(&self.source, &estimate, &self.map),
            source_xy: planar_xy(&self.source, &estimate),
        })
    }
}

#[wasm_bindgen]
impl Scene {
    #[wasm_bindgen(constructor)]
    pub fn new(seed: u32, resolution: f64) -> Result<Scene, JsError> {
        Scene::build(seed as u64, resolution).map_err(JsError::from)
    }

    pub fn resolution(&self) -> f64 {
        self.map.resolution()
    }

    pub fn voxels(&self) -> usize {
        self.map.len()
    }

    /// Interleaved `x, y` of the target points.
    pub fn target_xy(&self) -> Vec<f32> {
        planar_xy(&self.target, &Pose::identity())
    }

    /// Interleaved `x, y` of the source points placed by the guess.
    pub fn source_xy(&self, dx: f64, dy: f64, yaw_deg: f64) -> Vec<f32> {
        planar_xy(&self.source, &self.guess(dx, dy, yaw_deg))
    }

    /// Fraction of source points inside populated target voxels at the guess.
    pub fn overlap(&self, dx: f64, dy: f64, yaw_deg: f64) -> f64 {
        overlap_rate(&self.source, &self.guess(dx, dy, yaw_deg), &self.map)
    }

    pub fn register(&self, dx: f64, dy: f64, yaw_deg: f64) -> Result<Registration, JsError> {
        self.run_registration(dx, dy, yaw_deg).map_err(JsError::from)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use vgmap::cloud::transform_cloud;

    #[test]
    fn tukey_weights_peak_at_the_offset() {
        let w = tukey_weights(1.0, 1.0, 2.0, 20);
        assert_eq!(w.len(), 21);
        assert_eq!(w[10], 1.0);
        assert_eq!(w[0], 0.0);
        assert_eq!(w[20], 0.0);
        assert!(w[5] > 0.0 && w[5] < 1.0);
    }

    #[test]
    fn overlap_drops_with_the_offset() {
        let scene = Scene::build(3, 0.5).unwrap();
        let at_truth = scene.overlap(0.0, 0.0, 0.0);
        assert!(at_truth > 0.5, "{at_truth}");
        assert!(scene.overlap(30.0, 0.0, 0.0) < at_truth);
        let aligned = transform_cloud(&scene.source, &scene.truth);
        let direct = overlap_rate(&aligned, &Pose::identity(), &scene.map);
        assert!((direct - at_truth).abs() < 1e-12);
    }

    #[test]
    fn small_offsets_register_back() {
        let scene = Scene::build(3, 0.5).unwrap();
        let r = scene.run_registration(0.2, -0.15, 2.0).unwrap();
        assert!(r.translation_error < 0.05, "{}", r.translation_error);
        assert!(r.rotation_error_deg < 0.5);
        assert!(r.errors.last().unwrap() <= &r.errors[0]);
    }

    #[test]
    fn drawn_points_are_interleaved_pairs() {
        let scene = Scene::build(1, 1.0).unwrap();
        let xy = scene.target_xy();
        assert!(!xy.is_empty() && xy.len().is_multiple_of(2));
        assert!(xy.len() / 2 <= MAX_DRAWN_POINTS);
        let r = scene.run_registration(0.0, 0.0, 0.0).unwrap();
        assert_eq!(r.source_xy.len(), scene.source_xy(0.0, 0.0, 0.0).len());
    }
}
