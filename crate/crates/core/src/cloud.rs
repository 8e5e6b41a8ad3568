//! Point clouds whose points carry a mean and a 3x3 covariance.

use nalgebra::{Matrix3, SymmetricEigen, Vector3};
use rustc_hash::FxHashMap;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kdtree::KdTree;
use crate::par;
use crate::se3::Pose;

/// Smallest eigenvalue assigned to every regularized point covariance.
pub const PLANE_EPSILON: f64 = 1e-3;
pub const DEFAULT_NEIGHBORS: usize = 10;
pub const MIN_NEIGHBORS: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianPoint {
    pub mean: Vector3<f64>,
    pub cov: Matrix3<f64>,
}

impl GaussianPoint {
    pub fn new(mean: Vector3<f64>, cov: Matrix3<f64>) -> Self {
        GaussianPoint { mean, cov }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct PointCloud {
    pub points: Vec<GaussianPoint>,
    pub intensity: Option<Vec<f32>>,
}

impl PointCloud {
    pub fn new(points: Vec<GaussianPoint>) -> Self {
        PointCloud {
            points,
            intensity: None,
        }
    }

    /// Points with zero covariance, e.g. before covariance estimation.
    pub fn from_means<I: IntoIterator<Item = Vector3<f64>>>(means: I) -> Self {
        PointCloud::new(
            means
                .into_iter()
                .map(|m| GaussianPoint::new(m, Matrix3::zeros()))
                .collect(),
        )
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn means(&self) -> impl Iterator<Item = Vector3<f64>> + '_ {
        self.points.iter().map(|p| p.mean)
    }

    pub fn validate(&self) -> Result<()> {
        if self.points.is_empty() {
            return Err(Error::EmptyCloud);
        }
        for (index, p) in self.points.iter().enumerate() {
            if !p.mean.iter().all(|v| v.is_finite()) {
                return Err(Error::NonFinitePoint { index });
            }
        }
        Ok(())
    }

    pub fn kdtree(&self) -> KdTree {
        KdTree::new(self.means())
    }

    /// Exact `k` nearest point indices; ties are broken by lower index.
    pub fn nearest_neighbors(&self, query: &Vector3<f64>, k: usize) -> Vec<usize> {
        self.kdtree().knn(query, k).into_iter().map(|(i, _)| i).collect()
    }

    pub fn extend(&mut self, other: &PointCloud) {
        match (&mut self.intensity, &other.intensity) {
            (Some(a), Some(b)) => a.extend_from_slice(b),
            (Some(a), None) => a.extend(std::iter::repeat_n(0.0, other.len())),
            (None, Some(b)) if self.points.is_empty() => self.intensity = Some(b.clone()),
            (None, Some(_)) => {}
            (None, None) => {}
        }
        self.points.extend_from_slice(&other.points);
    }
}

/// Replaces the eigenvalues of a sample covariance with `(1, 1, PLANE_EPSILON)`.
pub fn regularize_covariance(sample: &Matrix3<f64>) -> Matrix3<f64> {
    let eig = SymmetricEigen::new(*sample);
    let mut k = 0;
    for i in 1..3 {
        if eig.eigenvalues[i] < eig.eigenvalues[k] {
            k = i;
        }
    }
    let n = eig.eigenvectors.column(k).normalize();
    let mut c = Matrix3::identity() - n * n.transpose() * (1.0 - PLANE_EPSILON);
    // exact symmetry
    c = (c + c.transpose()) * 0.5;
    c
}

fn sample_covariance(points: &[Vector3<f64>]) -> Matrix3<f64> {
    let n = points.len() as f64;
    let mean = points.iter().fold(Vector3::zeros(), |a, p| a + p) / n;
    let mut cov = Matrix3::zeros();
    for p in points {
        let d = p - mean;
        cov += d * d.transpose();
    }
    cov / n
}

/// Per-point covariances from the `k` nearest neighbors (the point itself
/// included), regularized to a plane-like spectrum.
pub fn estimate_covariances(cloud: &PointCloud, k: usize) -> Result<PointCloud> {
    if k < MIN_NEIGHBORS {
        return Err(Error::NeighborCount { k, min: MIN_NEIGHBORS });
    }
    if cloud.len() <= k {
        return Err(Error::TooFewPoints {
            points: cloud.len(),
            k,
        });
    }
    cloud.validate()?;
    let tree = cloud.kdtree();
    let covs = par::map(&cloud.points, |p| {
        let neighbors: Vec<Vector3<f64>> = tree
            .knn(&p.mean, k)
            .into_iter()
            .map(|(i, _)| cloud.points[i].mean)
            .collect();
        regularize_covariance(&sample_covariance(&neighbors))
    });
    let points = cloud
        .points
        .iter()
        .zip(covs)
        .map(|(p, cov)| GaussianPoint::new(p.mean, cov))
        .collect();
    Ok(PointCloud {
        points,
        intensity: cloud.intensity.clone(),
    })
}

/// Maps means by `pose` and covariances by `R C R^T`.
pub fn transform_cloud(cloud: &PointCloud, pose: &Pose) -> PointCloud {
    let r = pose.rotation;
    let rt = r.transpose();
    let points = cloud
        .points
        .iter()
        .map(|p| GaussianPoint::new(pose.transform_point(&p.mean), r * p.cov * rt))
        .collect();
    PointCloud {
        points,
        intensity: cloud.intensity.clone(),
    }
}

/// Voxel-grid downsampling: one centroid per occupied cell, in first-seen
/// order. Covariances are dropped; re-estimate them afterwards.
pub fn voxel_downsample(cloud: &PointCloud, resolution: f64) -> PointCloud {
    if resolution <= 0.0 {
        return cloud.clone();
    }
    let inv = 1.0 / resolution;
    let mut cells: FxHashMap<[i64; 3], usize> = FxHashMap::default();
    let mut sums: Vec<(Vector3<f64>, f64, usize)> = Vec::new();
    let intensity = cloud.intensity.as_ref();
    for (i, p) in cloud.points.iter().enumerate() {
        let key = [
            (p.mean.x * inv).floor() as i64,
            (p.mean.y * inv).floor() as i64,
            (p.mean.z * inv).floor() as i64,
        ];
        let slot = *cells.entry(key).or_insert_with(|| {
            sums.push((Vector3::zeros(), 0.0, 0));
            sums.len() - 1
        });
        let s = &mut sums[slot];
        s.0 += p.mean;
        s.1 += intensity.map_or(0.0, |v| v[i] as f64);
        s.2 += 1;
    }
    let points = sums
        .iter()
        .map(|(m, _, n)| GaussianPoint::new(m / *n as f64, Matrix3::zeros()))
        .collect();
    PointCloud {
        points,
        intensity: intensity.map(|_| sums.iter().map(|(_, s, n)| (*s / *n as f64) as f32).collect()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::se3::Twist;
    use proptest::prelude::*;

    fn sorted_eigs(c: &Matrix3<f64>) -> [f64; 3] {
        let mut e: Vec<f64> = SymmetricEigen::new(*c).eigenvalues.iter().copied().collect();
        e.sort_by(f64::total_cmp);
        [e[0], e[1], e[2]]
    }

    fn assert_plane_spectrum(c: &Matrix3<f64>) {
        assert!((c - c.transpose()).amax() < 1e-9);
        let e = sorted_eigs(c);
        assert!((e[0] - PLANE_EPSILON).abs() < 1e-9, "{e:?}");
        assert!((e[1] - 1.0).abs() < 1e-9, "{e:?}");
        assert!((e[2] - 1.0).abs() < 1e-9, "{e:?}");
    }

    #[test]
    fn coplanar_points_get_plane_normal() {
        // 20 points on the plane x + 2y - z = 3.
        let normal = Vector3::new(1.0, 2.0, -1.0).normalize();
        let pts: Vec<Vector3<f64>> = (0..20)
            .map(|i| {
                let u = (i % 5) as f64 * 0.7;
                let v = (i / 5) as f64 * 0.9 + (i as f64 * 0.13).sin() * 0.1;
                Vector3::new(u, v, u + 2.0 * v - 3.0)
            })
            .collect();
        let cloud = estimate_covariances(&PointCloud::from_means(pts), 10).unwrap();
        for p in &cloud.points {
            assert_plane_spectrum(&p.cov);
            // The normal direction is the epsilon eigenvector.
            let along = (p.cov * normal).norm();
            assert!((along - PLANE_EPSILON).abs() < 1e-9);
        }
    }

    #[test]
    fn collinear_points_do_not_produce_nan() {
        let pts: Vec<Vector3<f64>> = (0..12).map(|i| Vector3::new(i as f64, 2.0 * i as f64, 0.5)).collect();
        let cloud = estimate_covariances(&PointCloud::from_means(pts), 5).unwrap();
        for p in &cloud.points {
            assert!(p.cov.iter().all(|v| v.is_finite()));
            assert_plane_spectrum(&p.cov);
        }
    }

    #[test]
    fn too_few_points() {
        let pts: Vec<Vector3<f64>> = (0..10).map(|i| Vector3::new(i as f64, 0.0, 0.0)).collect();
        let cloud = PointCloud::from_means(pts);
        assert!(matches!(
            estimate_covariances(&cloud, 10),
            Err(Error::TooFewPoints { points: 10, k: 10 })
        ));
        assert!(matches!(
            estimate_covariances(&cloud, 3),
            Err(Error::NeighborCount { .. })
        ));
    }

    #[test]
    fn transform_examples() {
        let cloud = PointCloud::new(vec![GaussianPoint::new(
            Vector3::new(1.0, 2.0, 3.0),
            Matrix3::from_diagonal(&Vector3::new(1.0, 2.0, 3.0)),
        )]);
        assert_eq!(transform_cloud(&cloud, &Pose::identity()), cloud);
        let moved = transform_cloud(&cloud, &Pose::from_translation(Vector3::new(1.0, 1.0, 1.0)));
        assert_eq!(moved.points[0].cov, cloud.points[0].cov);
        assert_eq!(moved.points[0].mean, Vector3::new(2.0, 3.0, 4.0));
        let rot = transform_cloud(&cloud, &Pose::from_yaw(std::f64::consts::FRAC_PI_2, Vector3::zeros()));
        let expected = Matrix3::from_diagonal(&Vector3::new(2.0, 1.0, 3.0));
        assert!((rot.points[0].cov - expected).amax() < 1e-12);
    }

    #[test]
    fn downsample_keeps_one_point_per_cell() {
        let pts = vec![
            Vector3::new(0.1, 0.1, 0.1),
            Vector3::new(0.3, 0.3, 0.3),
            Vector3::new(1.5, 0.1, 0.1),
        ];
        let d = voxel_downsample(&PointCloud::from_means(pts), 1.0);
        assert_eq!(d.len(), 2);
        assert!((d.points[0].mean - Vector3::new(0.2, 0.2, 0.2)).norm() < 1e-12);
    }

    proptest! {
        #[test]
        fn transform_roundtrip(
            v in prop::array::uniform6(-2.0f64..2.0),
            pts in prop::collection::vec(prop::array::uniform3(-50.0f64..50.0), 1..40),
        ) {
            let pose = Pose::exp(&Twist::from_slice(&[v[0], v[1], v[2], v[3] * 10.0, v[4] * 10.0, v[5] * 10.0]));
            let cloud = PointCloud::new(pts.iter().map(|p| {
                let m = Vector3::new(p[0], p[1], p[2]);
                GaussianPoint::new(m, m * m.transpose() * 0.01 + Matrix3::identity())
            }).collect());
            let back = transform_cloud(&transform_cloud(&cloud, &pose), &pose.inverse());
            for (a, b) in cloud.points.iter().zip(&back.points) {
                prop_assert!((a.mean - b.mean).amax() < 1e-9);
                prop_assert!((a.cov - b.cov).amax() < 1e-9);
            }
        }
    }
}
