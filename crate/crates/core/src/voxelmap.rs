//! Hash grid of aggregated Gaussian voxel distributions and the voxel
//! based overlap rate.

use nalgebra::{Matrix3, Vector3};
use rustc_hash::FxHashMap;

use crate::cloud::PointCloud;
use crate::error::{Error, Result};
use crate::par;
use crate::se3::Pose;

/// Largest supported voxel coordinate magnitude per axis.
pub const MAX_VOXEL_COORD: i64 = 1_000_000;
const KEY_BITS: u32 = 21;
const KEY_BIAS: i64 = 1 << (KEY_BITS - 1);
const KEY_MASK: u64 = (1 << KEY_BITS) - 1;

pub const DEFAULT_LOCAL_RESOLUTION: f64 = 0.5;
pub const DEFAULT_GLOBAL_RESOLUTION: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianVoxel {
    pub mean: Vector3<f64>,
    pub cov: Matrix3<f64>,
    pub count: usize,
}

#[inline]
fn voxel_coord(p: &Vector3<f64>, resolution: f64) -> [i64; 3] {
    [
        (p.x / resolution).floor() as i64,
        (p.y / resolution).floor() as i64,
        (p.z / resolution).floor() as i64,
    ]
}

#[inline]
fn pack(c: [i64; 3]) -> Option<u64> {
    if c.iter().any(|v| v.abs() > MAX_VOXEL_COORD) {
        return None;
    }
    let enc = |v: i64| ((v + KEY_BIAS) as u64) & KEY_MASK;
    Some(enc(c[0]) | (enc(c[1]) << KEY_BITS) | (enc(c[2]) << (2 * KEY_BITS)))
}

#[derive(Debug, Clone)]
pub struct GaussianVoxelMap {
    resolution: f64,
    index: FxHashMap<u64, u32>,
    voxels: Vec<GaussianVoxel>,
    coords: Vec<[i64; 3]>,
}

impl GaussianVoxelMap {
    /// Aggregates every point into the voxel containing its mean.
    ///
    /// The voxel covariance merges point distributions by the law of total
    /// covariance: `(sum C_k + sum (mu_k - mu)(mu_k - mu)^T) / n`.
    pub fn build(cloud: &PointCloud, resolution: f64) -> Result<Self> {
        if !(resolution > 0.0 && resolution.is_finite()) {
            return Err(Error::InvalidResolution(resolution));
        }
        let mut index: FxHashMap<u64, u32> = FxHashMap::default();
        let mut coords = Vec::new();
        let mut members: Vec<Vec<u32>> = Vec::new();
        for (i, p) in cloud.points.iter().enumerate() {
            if !p.mean.iter().all(|v| v.is_finite()) {
                return Err(Error::NonFinitePoint { index: i });
            }
            let coord = voxel_coord(&p.mean, resolution);
            let key = pack(coord).ok_or(Error::VoxelOutOfRange { index: i, coord })?;
            let slot = *index.entry(key).or_insert_with(|| {
                coords.push(coord);
                members.push(Vec::new());
                (members.len() - 1) as u32
            });
            members[slot as usize].push(i as u32);
        }
        let voxels = members
            .iter()
            .map(|ids| {
                let n = ids.len() as f64;
                let mean = ids
                    .iter()
                    .fold(Vector3::zeros(), |a, &i| a + cloud.points[i as usize].mean)
                    / n;
                let mut cov = Matrix3::zeros();
                for &i in ids {
                    let p = &cloud.points[i as usize];
                    let d = p.mean - mean;
                    cov += p.cov + d * d.transpose();
                }
                GaussianVoxel {
                    mean,
                    cov: cov / n,
                    count: ids.len(),
                }
            })
            .collect();
        Ok(GaussianVoxelMap {
            resolution,
            index,
            voxels,
            coords,
        })
    }

    pub fn resolution(&self) -> f64 {
        self.resolution
    }

    pub fn len(&self) -> usize {
        self.voxels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.voxels.is_empty()
    }

    pub fn voxels(&self) -> &[GaussianVoxel] {
        &self.voxels
    }

    /// Integer coordinates of each stored voxel, parallel to [`Self::voxels`].
    pub fn coords(&self) -> &[[i64; 3]] {
        &self.coords
    }

    pub fn coord_of(&self, point: &Vector3<f64>) -> [i64; 3] {
        voxel_coord(point, self.resolution)
    }

    /// The voxel containing `point`, if populated. Faces belong to the lower cell.
    #[inline]
    pub fn lookup(&self, point: &Vector3<f64>) -> Option<&GaussianVoxel> {
        let key = pack(voxel_coord(point, self.resolution))?;
        self.index.get(&key).map(|&i| &self.voxels[i as usize])
    }

    #[inline]
    pub fn contains(&self, point: &Vector3<f64>) -> bool {
        pack(voxel_coord(point, self.resolution)).is_some_and(|k| self.index.contains_key(&k))
    }
}

/// Fraction of points of `cloud`, moved by `pose_rel` into the frame of
/// `map`, that fall inside a populated voxel.
pub fn overlap_rate(cloud: &PointCloud, pose_rel: &Pose, map: &GaussianVoxelMap) -> f64 {
    if cloud.is_empty() {
        return 0.0;
    }
    let hits = overlap_count(cloud, pose_rel, map);
    hits as f64 / cloud.len() as f64
}

pub fn overlap_count(cloud: &PointCloud, pose_rel: &Pose, map: &GaussianVoxelMap) -> usize {
    par::sum_by(
        &cloud.points,
        true,
        0usize,
        |acc, p| {
            if map.contains(&pose_rel.transform_point(&p.mean)) {
                *acc += 1;
            }
        },
        |a, b| a + b,
    )
}
