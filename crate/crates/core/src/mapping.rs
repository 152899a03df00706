//! Keyframe feature map and scan-to-map refinement.
//!
//! Keyframes are accumulated in the world frame and thinned to one point
//! per voxel and kind. Refinement reuses the two-step estimator with targets
//! fitted to the map: a line through the k nearest map edges when they are
//! elongated enough, and a plane through the k nearest map planars when they
//! are flat enough. Cluster labels are not used on the map side.

use std::collections::BTreeMap;
use std::path::Path;

use nalgebra::{Matrix3, SymmetricEigen, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::feature::{Feature, FeatureSet};
use crate::lidar_model::{io, PointCloud};
use crate::register::{
    estimate_motion_with, MatchParams, MotionEstimate, RigidTransform, TargetSource,
};
use crate::spatial::KdTree;
use crate::Point;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MappingParams {
    pub voxel_size_m: f64,
    /// Map points farther than this from the pose are left out of refinement.
    pub search_radius_m: f64,
    /// Neighbors used to fit a line or plane target.
    pub knn: usize,
    /// Largest distance of any fitted neighbor from its plane.
    pub plane_tolerance_m: f64,
    /// Smallest ratio of the largest to the second eigenvalue for a line.
    pub line_eigen_ratio: f64,
    pub keyframe_translation_m: f64,
    pub keyframe_rotation_deg: f64,
}

impl Default for MappingParams {
    fn default() -> Self {
        MappingParams {
            voxel_size_m: 0.2,
            search_radius_m: 30.0,
            knn: 5,
            plane_tolerance_m: 0.2,
            line_eigen_ratio: 3.0,
            keyframe_translation_m: 0.3,
            keyframe_rotation_deg: 5.0,
        }
    }
}

impl MappingParams {
    pub fn validate(&self) -> Result<()> {
        let ok = self.voxel_size_m > 0.0
            && self.search_radius_m > 0.0
            && self.knn >= 3
            && self.plane_tolerance_m > 0.0
            && self.line_eigen_ratio >= 1.0
            && self.keyframe_translation_m >= 0.0
            && self.keyframe_rotation_deg >= 0.0;
        if !ok {
            return Err(Error::InvalidInput("invalid mapping parameters".into()));
        }
        Ok(())
    }

    /// Whether `current` has moved far enough from the last keyframe.
    pub fn is_keyframe(&self, last: &RigidTransform, current: &RigidTransform) -> bool {
        let d = last.between(current);
        d.translation.norm() > self.keyframe_translation_m
            || d.rotation_angle().to_degrees() > self.keyframe_rotation_deg
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MapPoint {
    pub point: Point,
    pub keyframe: u32,
}

type Voxel = (i64, i64, i64);

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMap {
    voxel_size_m: f64,
    edges: BTreeMap<Voxel, MapPoint>,
    planars: BTreeMap<Voxel, MapPoint>,
    n_keyframes: u32,
}

/// Neighbor points, their centroid and the eigen decomposition of their scatter.
type Neighborhood = (Vec<Point>, Vector3<f64>, SymmetricEigen<f64, nalgebra::U3>);

impl FeatureMap {
    pub fn new(voxel_size_m: f64) -> Result<Self> {
        if !(voxel_size_m > 0.0 && voxel_size_m.is_finite()) {
            return Err(Error::InvalidInput("voxel size must be positive".into()));
        }
        Ok(FeatureMap {
            voxel_size_m,
            edges: BTreeMap::new(),
            planars: BTreeMap::new(),
            n_keyframes: 0,
        })
    }

    pub fn voxel_size_m(&self) -> f64 {
        self.voxel_size_m
    }

    pub fn n_keyframes(&self) -> u32 {
        self.n_keyframes
    }

    pub fn len(&self) -> usize {
        self.edges.len() + self.planars.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn edges(&self) -> impl Iterator<Item = &MapPoint> {
        self.edges.values()
    }

    pub fn planars(&self) -> impl Iterator<Item = &MapPoint> {
        self.planars.values()
    }

    /// Adds the dense feature targets of a keyframe seen from `pose`.
    pub fn insert_keyframe(&mut self, pose: &RigidTransform, features: &FeatureSet) -> Result<()> {
        if !pose.is_finite() {
            return Err(Error::InvalidInput("keyframe pose is not finite".into()));
        }
        let id = self.n_keyframes;
        let world =
            |fs: &[Feature]| -> Vec<Point> { fs.iter().map(|f| pose.apply(&f.point)).collect() };
        let size = self.voxel_size_m;
        insert_downsampled(&mut self.edges, size, &world(&features.edge_targets), id);
        insert_downsampled(
            &mut self.planars,
            size,
            &world(&features.planar_targets),
            id,
        );
        self.n_keyframes += 1;
        Ok(())
    }

    /// All map points in one cloud, edges first; intensity 1 marks edges.
    pub fn to_cloud(&self) -> PointCloud {
        let points: Vec<Point> = self
            .edges()
            .chain(self.planars())
            .map(|m| m.point)
            .collect();
        let intensity = self
            .edges()
            .map(|_| 1.0)
            .chain(self.planars().map(|_| 0.0))
            .collect();
        PointCloud {
            points,
            rings: None,
            intensity: Some(intensity),
        }
    }

    pub fn write_pcd(&self, path: &Path) -> Result<()> {
        io::write_pcd(&self.to_cloud(), path)
    }
}

fn voxel_of(p: &Point, size: f64) -> Voxel {
    (
        (p.x / size).floor() as i64,
        (p.y / size).floor() as i64,
        (p.z / size).floor() as i64,
    )
}

/// Per touched voxel: keep the candidate nearest the centroid of the
/// retained point and the new points.
fn insert_downsampled(
    grid: &mut BTreeMap<Voxel, MapPoint>,
    size: f64,
    points: &[Point],
    keyframe: u32,
) {
    let mut incoming: BTreeMap<Voxel, Vec<MapPoint>> = BTreeMap::new();
    for p in points
        .iter()
        .filter(|p| p.coords.iter().all(|c| c.is_finite()))
    {
        incoming
            .entry(voxel_of(p, size))
            .or_default()
            .push(MapPoint {
                point: *p,
                keyframe,
            });
    }
    for (v, mut cands) in incoming {
        if let Some(old) = grid.get(&v) {
            cands.insert(0, *old);
        }
        let centroid = cands
            .iter()
            .fold(Vector3::zeros(), |a, m| a + m.point.coords)
            / cands.len() as f64;
        let best = cands
            .iter()
            .min_by(|a, b| {
                let da = (a.point.coords - centroid).norm_squared();
                let db = (b.point.coords - centroid).norm_squared();
                da.total_cmp(&db)
            })
            .copied()
            .expect("nonempty candidate list");
        grid.insert(v, best);
    }
}

/// Map points near a pose with line and plane fitting.
pub struct MapTargets<'a> {
    params: &'a MappingParams,
    edges: Vec<Point>,
    edge_tree: KdTree,
    planars: Vec<Point>,
    planar_tree: KdTree,
}

impl<'a> MapTargets<'a> {
    pub fn new(map: &FeatureMap, center: &Point, params: &'a MappingParams) -> Self {
        let r2 = params.search_radius_m * params.search_radius_m;
        let near = |it: &mut dyn Iterator<Item = &MapPoint>| -> Vec<Point> {
            it.filter(|m| (m.point - center).norm_squared() <= r2)
                .map(|m| m.point)
                .collect()
        };
        let edges = near(&mut map.edges());
        let planars = near(&mut map.planars());
        MapTargets {
            params,
            edge_tree: KdTree::build(&edges),
            planar_tree: KdTree::build(&planars),
            edges,
            planars,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty() && self.planars.is_empty()
    }

    fn neighborhood(
        &self,
        tree: &KdTree,
        pts: &[Point],
        q: &Point,
        radius: f64,
    ) -> Option<Neighborhood> {
        let nn = tree.k_nearest(q, self.params.knn, radius);
        if nn.len() < self.params.knn {
            return None;
        }
        let sel: Vec<Point> = nn.iter().map(|n| pts[n.index]).collect();
        let mean = sel.iter().fold(Vector3::zeros(), |a, p| a + p.coords) / sel.len() as f64;
        let mut cov = Matrix3::zeros();
        for p in &sel {
            let d = p.coords - mean;
            cov += d * d.transpose();
        }
        let n = sel.len() as f64;
        Some((sel, mean, SymmetricEigen::new(cov / n)))
    }
}

/// Eigen indices sorted by ascending eigenvalue.
fn eigen_order(e: &SymmetricEigen<f64, nalgebra::U3>) -> [usize; 3] {
    let mut idx = [0, 1, 2];
    idx.sort_by(|&a, &b| e.eigenvalues[a].total_cmp(&e.eigenvalues[b]));
    idx
}

impl TargetSource for MapTargets<'_> {
    fn edge_target(
        &self,
        q: &Point,
        _query: &Feature,
        params: &MatchParams,
    ) -> Option<(Point, Point)> {
        let (_, mean, eig) =
            self.neighborhood(&self.edge_tree, &self.edges, q, params.partner_radius_m)?;
        let [_, mid, big] = eigen_order(&eig);
        if !(eig.eigenvalues[big] > self.params.line_eigen_ratio * eig.eigenvalues[mid]) {
            return None;
        }
        let dir: Vector3<f64> = eig.eigenvectors.column(big).into_owned();
        let c = Point::from(mean);
        Some((c + 0.1 * dir, c - 0.1 * dir))
    }

    fn plane_target(
        &self,
        q: &Point,
        _query: &Feature,
        params: &MatchParams,
    ) -> Option<(Point, Point, Point)> {
        let (sel, mean, eig) =
            self.neighborhood(&self.planar_tree, &self.planars, q, params.partner_radius_m)?;
        let [small, mid, big] = eigen_order(&eig);
        let n: Vector3<f64> = eig.eigenvectors.column(small).into_owned();
        if sel
            .iter()
            .any(|p| (p.coords - mean).dot(&n).abs() > self.params.plane_tolerance_m)
        {
            return None;
        }
        let u: Vector3<f64> = eig.eigenvectors.column(big).into_owned();
        let v: Vector3<f64> = eig.eigenvectors.column(mid).into_owned();
        let c = Point::from(mean);
        Some((c, c + 0.5 * u, c + 0.5 * v))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Refinement {
    pub pose: RigidTransform,
    pub converged: bool,
    /// Set when the map could not constrain the pose; `pose` is then the input.
    pub warning: bool,
    pub estimate: Option<MotionEstimate>,
}

/// Scan-to-map refinement of a world pose. Never fails: on any problem the
/// input pose comes back with `warning` set.
pub fn refine_against_map(
    pose: &RigidTransform,
    features: &FeatureSet,
    map: &FeatureMap,
    match_params: &MatchParams,
    params: &MappingParams,
) -> Refinement {
    let fallback = Refinement {
        pose: *pose,
        converged: false,
        warning: true,
        estimate: None,
    };
    if map.is_empty() || features.is_empty() || !pose.is_finite() {
        return fallback;
    }
    let targets = MapTargets::new(map, &Point::from(pose.translation), params);
    if targets.is_empty() {
        return fallback;
    }
    match estimate_motion_with(&targets, features, pose, match_params) {
        Ok(est) if est.transform.is_finite() => Refinement {
            pose: est.transform,
            converged: est.converged,
            warning: false,
            estimate: Some(est),
        },
        _ => fallback,
    }
}
