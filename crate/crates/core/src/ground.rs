//! Ground extraction on range images.
//!
//! Three extractors share the [`GroundMask`] output type:
//!
//! * [`extract_ground_clustered`] grows breadth-first clusters from every
//!   valid cell in the lowest rows, joining 4-connected neighbors whose
//!   inclination is below a threshold, and keeps clusters that are large
//!   enough. A surface that is locally flat but not connected to the floor
//!   (a ceiling, a table top) is never reached.
//! * [`extract_ground_lego`] is the column-wise baseline: vertically adjacent
//!   cells in the lower half of the image are ground when their inclination
//!   is small, regardless of connectivity.
//! * [`extract_ground_gpf`] fits a plane to the lowest points and thresholds
//!   point-to-plane distance.

use std::collections::VecDeque;

use nalgebra::{Matrix3, SymmetricEigen, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lidar_model::{neighbor_angle_unchecked, PointCloud, RangeImage};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GroundParams {
    pub angle_threshold_deg: f64,
    /// Minimum cluster size for a seed cluster to count as ground.
    pub size_threshold: usize,
    pub seed_rows: usize,
}

impl Default for GroundParams {
    fn default() -> Self {
        GroundParams {
            angle_threshold_deg: 10.0,
            size_threshold: 100,
            seed_rows: 4,
        }
    }
}

impl GroundParams {
    /// Defaults with the seed rows taken from the sensor (lowest quarter).
    pub fn for_sensor(sensor: &crate::SensorModel) -> Self {
        GroundParams {
            seed_rows: sensor.ground_scan_rows,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.angle_threshold_deg > 0.0 && self.angle_threshold_deg < 90.0) {
            return Err(Error::InvalidInput(
                "angle_threshold_deg must be in (0, 90)".into(),
            ));
        }
        if self.size_threshold < 1 || self.seed_rows < 1 {
            return Err(Error::InvalidInput(
                "size_threshold and seed_rows must be >= 1".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GpfParams {
    pub n_lpr: usize,
    pub n_iterations: usize,
    pub seed_height_threshold_m: f64,
    pub distance_threshold_m: f64,
}

impl Default for GpfParams {
    fn default() -> Self {
        GpfParams {
            n_lpr: 20,
            n_iterations: 3,
            seed_height_threshold_m: 0.4,
            distance_threshold_m: 0.2,
        }
    }
}

impl GpfParams {
    pub fn validate(&self) -> Result<()> {
        if self.n_lpr == 0
            || self.n_iterations == 0
            || !(self.seed_height_threshold_m > 0.0)
            || !(self.distance_threshold_m > 0.0)
        {
            return Err(Error::InvalidInput(
                "GPF parameters must all be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Row-major boolean grid aligned with a [`RangeImage`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GroundMask {
    rows: usize,
    cols: usize,
    data: Vec<bool>,
}

impl GroundMask {
    pub fn new(rows: usize, cols: usize) -> Self {
        GroundMask {
            rows,
            cols,
            data: vec![false; rows * cols],
        }
    }

    pub fn for_image(image: &RangeImage) -> Self {
        Self::new(image.rows(), image.cols())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, row: usize, col: usize) -> bool {
        self.data[row * self.cols + col]
    }

    pub fn set(&mut self, row: usize, col: usize, value: bool) {
        self.data[row * self.cols + col] = value;
    }

    pub fn as_slice(&self) -> &[bool] {
        &self.data
    }

    pub fn count(&self) -> usize {
        self.data.iter().filter(|&&g| g).count()
    }

    /// Binary PGM (`P5`), 255 for ground. The top image line is the highest
    /// ring so the picture reads like the scene.
    pub fn to_pgm(&self) -> Vec<u8> {
        let mut out = format!("P5\n{} {}\n255\n", self.cols, self.rows).into_bytes();
        for r in (0..self.rows).rev() {
            out.extend(
                self.data[r * self.cols..(r + 1) * self.cols]
                    .iter()
                    .map(|&g| if g { 255u8 } else { 0 }),
            );
        }
        out
    }
}

/// Cluster-based ground extraction.
///
/// Seeds are visited column-major over the seed rows. Every valid seed that is
/// not yet part of a cluster starts a breadth-first search; a neighbor joins
/// when the inclination between it and the cell it is reached from is below
/// `angle_threshold_deg`. Invalid cells break adjacency. Clusters with at
/// least `size_threshold` cells become ground; smaller ones stay unlabeled.
pub fn extract_ground_clustered(image: &RangeImage, params: &GroundParams) -> GroundMask {
    let mut mask = GroundMask::for_image(image);
    for cluster in ground_clusters(image, params) {
        if cluster.len() >= params.size_threshold {
            for (r, c) in cluster {
                mask.set(r, c, true);
            }
        }
    }
    mask
}

/// All seed clusters in discovery order, regardless of size.
pub fn ground_clusters(image: &RangeImage, params: &GroundParams) -> Vec<Vec<(usize, usize)>> {
    let (rows, cols) = (image.rows(), image.cols());
    let seed_rows = params.seed_rows.min(rows);
    let mut visited = vec![false; rows * cols];
    let mut queue = VecDeque::new();
    let mut clusters = Vec::new();

    for col in 0..cols {
        for row in 0..seed_rows {
            let idx = image.index(row, col);
            if visited[idx] || !image.cell(row, col).valid {
                continue;
            }
            visited[idx] = true;
            queue.push_back((row, col));
            let mut cluster = vec![(row, col)];
            while let Some((r, c)) = queue.pop_front() {
                let here = image.cell(r, c).point;
                for (nr, nc) in image.neighbors4(r, c) {
                    let nidx = image.index(nr, nc);
                    let there = image.cell(nr, nc);
                    if visited[nidx] || !there.valid {
                        continue;
                    }
                    if neighbor_angle_unchecked(&here, &there.point) < params.angle_threshold_deg {
                        visited[nidx] = true;
                        queue.push_back((nr, nc));
                        cluster.push((nr, nc));
                    }
                }
            }
            clusters.push(cluster);
        }
    }
    clusters
}

/// Number of row pairs the column-wise baseline inspects: the lower half of
/// the image minus one (7 pairs for a 16-ring sensor).
pub fn lego_scan_rows(n_rows: usize) -> usize {
    (n_rows / 2).saturating_sub(1).max(1)
}

/// Column-wise baseline ground extraction.
pub fn extract_ground_lego(image: &RangeImage, angle_threshold_deg: f64) -> GroundMask {
    let mut mask = GroundMask::for_image(image);
    let pairs = lego_scan_rows(image.rows()).min(image.rows() - 1);
    for col in 0..image.cols() {
        for row in 0..pairs {
            let (a, b) = (image.cell(row, col), image.cell(row + 1, col));
            if !(a.valid && b.valid) {
                continue;
            }
            if neighbor_angle_unchecked(&a.point, &b.point) < angle_threshold_deg {
                mask.set(row, col, true);
                mask.set(row + 1, col, true);
            }
        }
    }
    mask
}

/// Plane `normal . p + offset = 0` with a unit normal.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Plane {
    pub normal: Vector3<f64>,
    pub offset: f64,
}

impl Plane {
    pub fn distance(&self, p: &crate::Point) -> f64 {
        (self.normal.dot(&p.coords) + self.offset).abs()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GpfResult {
    /// Per-point ground flags aligned with the input cloud.
    pub ground: Vec<bool>,
    pub plane: Plane,
}

/// Least-squares plane through `points`: centroid plus the eigenvector of the
/// smallest covariance eigenvalue.
pub fn fit_plane<'a>(points: impl IntoIterator<Item = &'a crate::Point>) -> Result<Plane> {
    let pts: Vec<&crate::Point> = points.into_iter().collect();
    if pts.len() < 3 {
        return Err(Error::DegeneratePlane(format!("{} points", pts.len())));
    }
    let n = pts.len() as f64;
    let centroid = pts.iter().fold(Vector3::zeros(), |acc, p| acc + p.coords) / n;
    let mut cov = Matrix3::zeros();
    for p in &pts {
        let d = p.coords - centroid;
        cov += d * d.transpose();
    }
    cov /= n;
    let eig = SymmetricEigen::new(cov);
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let largest = eig.eigenvalues[order[2]];
    let middle = eig.eigenvalues[order[1]];
    if !(largest > 0.0) || middle <= largest * 1e-12 {
        return Err(Error::DegeneratePlane(
            "seed covariance has rank < 2".into(),
        ));
    }
    let normal = eig.eigenvectors.column(order[0]).normalize();
    Ok(Plane {
        normal,
        offset: -normal.dot(&centroid),
    })
}

/// Ground plane fitting seeded by the lowest point representative.
///
/// The first fit uses every point below `mean(lowest n_lpr heights) +
/// seed_height_threshold_m`; later iterations refit to the current ground set.
pub fn extract_ground_gpf(cloud: &PointCloud, params: &GpfParams) -> Result<GpfResult> {
    params.validate()?;
    if cloud.len() < params.n_lpr {
        return Err(Error::InvalidInput(format!(
            "GPF needs at least {} points, got {}",
            params.n_lpr,
            cloud.len()
        )));
    }
    let mut heights: Vec<f64> = cloud.points.iter().map(|p| p.z).collect();
    heights.sort_by(f64::total_cmp);
    let lpr = heights[..params.n_lpr].iter().sum::<f64>() / params.n_lpr as f64;
    let mut seeds: Vec<bool> = cloud
        .points
        .iter()
        .map(|p| p.z < lpr + params.seed_height_threshold_m)
        .collect();

    let mut result = None;
    for _ in 0..params.n_iterations {
        let plane = fit_plane(
            cloud
                .points
                .iter()
                .zip(&seeds)
                .filter(|(_, &s)| s)
                .map(|(p, _)| p),
        )?;
        let ground: Vec<bool> = cloud
            .points
            .iter()
            .map(|p| plane.distance(p) < params.distance_threshold_m)
            .collect();
        seeds.clone_from(&ground);
        result = Some(GpfResult { ground, plane });
    }
    Ok(result.expect("n_iterations >= 1"))
}

/// Scatters per-point flags onto the image cells that hold those points.
pub fn mask_from_point_flags(image: &RangeImage, flags: &[bool]) -> GroundMask {
    let mut mask = GroundMask::for_image(image);
    for r in 0..image.rows() {
        for c in 0..image.cols() {
            let cell = image.cell(r, c);
            if let (true, Some(i)) = (cell.valid, cell.source) {
                mask.set(r, c, flags.get(i).copied().unwrap_or(false));
            }
        }
    }
    mask
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MaskMetrics {
    pub precision: f64,
    pub recall: f64,
    pub iou: f64,
}

/// Set metrics of `predicted` against `truth`. Empty denominators count as a
/// perfect score.
pub fn mask_metrics(predicted: &GroundMask, truth: &GroundMask) -> Result<MaskMetrics> {
    if (predicted.rows, predicted.cols) != (truth.rows, truth.cols) {
        return Err(Error::DimensionMismatch {
            expected: (truth.rows, truth.cols),
            actual: (predicted.rows, predicted.cols),
        });
    }
    let (mut tp, mut fp, mut fn_) = (0usize, 0usize, 0usize);
    for (&p, &t) in predicted.data.iter().zip(&truth.data) {
        match (p, t) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fn_ += 1,
            _ => {}
        }
    }
    let ratio = |num: usize, den: usize| {
        if den == 0 {
            1.0
        } else {
            num as f64 / den as f64
        }
    };
    Ok(MaskMetrics {
        precision: ratio(tp, tp + fp),
        recall: ratio(tp, tp + fn_),
        iou: ratio(tp, tp + fp + fn_),
    })
}
