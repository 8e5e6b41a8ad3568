//! Pipeline configuration, read from and written to TOML.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::factors::{GicpSettings, DEFAULT_LOOP_INFORMATION};
use crate::graph::LmSettings;
use crate::kernel::RobustKernel;
use crate::voxelmap::{DEFAULT_GLOBAL_RESOLUTION, DEFAULT_LOCAL_RESOLUTION};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OdometrySource {
    /// Initial guesses read from a pose file (or the synthetic generator).
    File,
    /// Frame-to-previous-frame GICP.
    ScanMatching,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PreprocessConfig {
    pub min_range: f64,
    pub max_range: f64,
    /// Voxel size for per-frame downsampling; 0 disables it.
    pub downsample: f64,
    pub covariance_neighbors: usize,
    pub odometry: OdometrySource,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        PreprocessConfig {
            min_range: 1.0,
            max_range: 100.0,
            downsample: 0.25,
            covariance_neighbors: crate::cloud::DEFAULT_NEIGHBORS,
            odometry: OdometrySource::File,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LocalConfig {
    /// Frame voxel resolution `r^L`.
    pub resolution: f64,
    /// Frames overlapping the last keyframe more than this are skipped.
    pub skip_overlap: f64,
    /// A submap is emitted once first/last overlap drops below this.
    pub min_overlap: f64,
    /// Maximum number of frames per submap.
    pub max_frames: usize,
    /// Voxel size used to thin the merged submap cloud; 0 disables it.
    pub submap_downsample: f64,
}

impl Default for LocalConfig {
    fn default() -> Self {
        LocalConfig {
            resolution: DEFAULT_LOCAL_RESOLUTION,
            skip_overlap: 0.95,
            min_overlap: 0.10,
            max_frames: 20,
            submap_downsample: 0.25,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GlobalConfig {
    /// Submap voxel resolution `r^G`.
    pub resolution: f64,
    /// Matching cost factors are created above this overlap.
    pub min_overlap: f64,
    /// Optimize after every submap insertion rather than once at the end.
    pub optimize_every_submap: bool,
}

impl Default for GlobalConfig {
    fn default() -> Self {
        GlobalConfig {
            resolution: DEFAULT_GLOBAL_RESOLUTION,
            min_overlap: 0.025,
            optimize_every_submap: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LoopConfig {
    pub enabled: bool,
    pub proximity: bool,
    pub proximity_radius: f64,
    pub min_id_gap: usize,
    /// Gate: post-alignment overlap must reach this.
    pub min_overlap: f64,
    /// Gate: mean GICP residual must not exceed this.
    pub max_mean_error: f64,
    /// Diagonal information, rotation first.
    pub information: [f64; 6],
    pub kernel: RobustKernel,
    pub gicp: GicpSettings,
}

impl Default for LoopConfig {
    fn default() -> Self {
        LoopConfig {
            enabled: true,
            proximity: true,
            proximity_radius: 20.0,
            min_id_gap: 5,
            min_overlap: 0.3,
            max_mean_error: 0.5,
            information: DEFAULT_LOOP_INFORMATION,
            kernel: RobustKernel::shifted_tukey(crate::kernel::DEFAULT_TUKEY_WIDTH, crate::kernel::DEFAULT_TUKEY_OFFSET),
            gicp: GicpSettings::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvaluationConfig {
    pub mme_radius: f64,
    /// Voxel size for thinning the map before entropy evaluation.
    pub mme_downsample: f64,
    /// Huber delta of the SE3 factors in the ablation.
    pub huber_delta: f64,
    /// Subsegment lengths for the relative trajectory error, meters.
    pub rte_lengths: Vec<f64>,
    /// A local entropy map is centered on every n-th frame; 0 disables them.
    pub mme_every: usize,
    /// Frames within this distance of the center join its local map.
    pub mme_local_radius: f64,
    /// Also re-optimize with every matching cost factor swapped for a GICP
    /// relative pose factor.
    pub ablation: bool,
}

impl Default for EvaluationConfig {
    fn default() -> Self {
        EvaluationConfig {
            mme_radius: 0.5,
            mme_downsample: 0.1,
            huber_delta: crate::kernel::DEFAULT_HUBER_DELTA,
            rte_lengths: crate::eval::KITTI_LENGTHS.to_vec(),
            mme_every: 10,
            mme_local_radius: 10.0,
            ablation: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RuntimeConfig {
    pub deterministic: bool,
    /// Worker threads; 0 uses all available cores.
    pub threads: usize,
}

impl Default for RuntimeConfig {
    fn default() -> Self {
        RuntimeConfig {
            deterministic: true,
            threads: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub preprocess: PreprocessConfig,
    pub local: LocalConfig,
    pub global: GlobalConfig,
    pub loops: LoopConfig,
    pub optimizer: LmSettings,
    pub evaluation: EvaluationConfig,
    pub runtime: RuntimeConfig,
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Config(msg));
        let g = self.global.min_overlap;
        let lmin = self.local.min_overlap;
        let lmax = self.local.skip_overlap;
        if !(0.0 < g && g < lmin && lmin < lmax && lmax <= 1.0) {
            return fail(format!(
                "overlap thresholds must satisfy 0 < global.min_overlap ({g}) < local.min_overlap ({lmin}) < local.skip_overlap ({lmax}) <= 1"
            ));
        }
        for (name, r) in [("local.resolution", self.local.resolution), ("global.resolution", self.global.resolution)] {
            if !(r > 0.0 && r.is_finite()) {
                return fail(format!("{name} must be positive, got {r}"));
            }
        }
        if self.local.max_frames < 1 {
            return fail("local.max_frames must be at least 1".into());
        }
        if self.preprocess.covariance_neighbors < crate::cloud::MIN_NEIGHBORS {
            return fail(format!(
                "preprocess.covariance_neighbors must be at least {}",
                crate::cloud::MIN_NEIGHBORS
            ));
        }
        if !(self.preprocess.max_range > self.preprocess.min_range && self.preprocess.min_range >= 0.0) {
            return fail("preprocess ranges must satisfy 0 <= min_range < max_range".into());
        }
        for (name, v) in [
            ("preprocess.downsample", self.preprocess.downsample),
            ("local.submap_downsample", self.local.submap_downsample),
            ("evaluation.mme_downsample", self.evaluation.mme_downsample),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return fail(format!("{name} must be non-negative"));
            }
        }
        if !self.loops.kernel.is_valid() {
            return fail("loops.kernel has invalid parameters".into());
        }
        if self.loops.information.iter().any(|v| !(*v >= 0.0)) {
            return fail("loops.information must be non-negative".into());
        }
        let e = &self.evaluation;
        if !(e.mme_radius > 0.0) || !(e.huber_delta > 0.0) || !(e.mme_local_radius > 0.0) {
            return fail("evaluation.mme_radius, mme_local_radius and huber_delta must be positive".into());
        }
        if e.rte_lengths.iter().any(|l| !(*l > 0.0 && l.is_finite())) {
            return fail("evaluation.rte_lengths must be positive".into());
        }
        let lm = &self.optimizer;
        if !(lm.initial_lambda > 0.0 && lm.max_lambda >= lm.initial_lambda && lm.lambda_up > 1.0 && lm.lambda_down > 0.0 && lm.lambda_down < 1.0) {
            return fail("optimizer damping parameters are inconsistent".into());
        }
        Ok(())
    }

    /// Optimizer settings with the runtime determinism flag applied.
    pub fn lm_settings(&self) -> LmSettings {
        LmSettings {
            deterministic: self.runtime.deterministic,
            ..self.optimizer
        }
    }

    pub fn from_toml_str(text: &str) -> Result<PipelineConfig> {
        let config: PipelineConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("configuration is always representable in TOML")
    }

    pub fn load(path: &Path) -> Result<PipelineConfig> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn defaults_are_valid() {
        PipelineConfig::default().validate().unwrap();
    }

    #[test]
    fn partial_file_fills_defaults() {
        let c = PipelineConfig::from_toml_str("[local]\nmax_frames = 12\n[loops]\nenabled = false\n").unwrap();
        assert_eq!(c.local.max_frames, 12);
        assert!(!c.loops.enabled);
        assert_eq!(c.global, GlobalConfig::default());
    }

    #[test]
    fn kernel_table_syntax() {
        let c = PipelineConfig::from_toml_str("[loops.kernel]\nkind = \"shifted_tukey\"\nwidth = 2.0\noffset = 0.5\n").unwrap();
        assert_eq!(c.loops.kernel, RobustKernel::shifted_tukey(2.0, 0.5));
    }

    #[test]
    fn rejects_bad_thresholds() {
        for text in [
            "[global]\nmin_overlap = 0.2\n",
            "[local]\nskip_overlap = 1.5\n",
            "[local]\nresolution = 0.0\n",
            "[local]\nmin_overlap = 0.99\n",
        ] {
            assert!(matches!(PipelineConfig::from_toml_str(text), Err(Error::Config(_))), "{text}");
        }
        assert!(matches!(PipelineConfig::from_toml_str("[local]\nbogus = 1\n"), Err(Error::Config(_))));
    }

    proptest! {
        #[test]
        fn parse_serialize_is_idempotent(
            g in 0.001f64..0.05,
            lmin in 0.06f64..0.5,
            lmax in 0.6f64..1.0,
            frames in 1usize..40,
            rl in 0.05f64..2.0,
            rg in 0.05f64..4.0,
            det in any::<bool>(),
            threads in 0usize..16,
        ) {
            let mut c = PipelineConfig::default();
            c.global.min_overlap = g;
            c.local.min_overlap = lmin;
            c.local.skip_overlap = lmax;
            c.local.max_frames = frames;
            c.local.resolution = rl;
            c.global.resolution = rg;
            c.runtime.deterministic = det;
            c.runtime.threads = threads;
            let text = c.to_toml_string();
            let parsed = PipelineConfig::from_toml_str(&text).unwrap();
            prop_assert_eq!(&parsed, &c);
            prop_assert_eq!(parsed.to_toml_string(), text);
        }
    }
}
