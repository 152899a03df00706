//! Range-image segmentation of non-ground returns.
//!
//! Two 4-connected valid, non-ground cells belong to the same segment when
//! the angle between the beam of the farther return and the segment joining
//! both returns is large:
//!
//! `beta = atan2(d2 sin(alpha), d1 - d2 cos(alpha)) > threshold`
//!
//! with `d1 >= d2` the two ranges and `alpha` the angular step between the
//! cells (column width for horizontal neighbors, ring spacing for vertical
//! ones). Segments smaller than `min_cluster_size` are discarded.

use std::collections::{BTreeMap, VecDeque};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::ground::GroundMask;
use crate::lidar_model::RangeImage;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SegmentParams {
    pub min_cluster_size: usize,
    pub connect_angle_deg: f64,
}

impl Default for SegmentParams {
    fn default() -> Self {
        SegmentParams {
            min_cluster_size: 30,
            connect_angle_deg: 60.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CellLabel {
    Invalid,
    Ground,
    /// Part of a segment below the size limit.
    Discarded,
    Cluster(u32),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SegmentationResult {
    rows: usize,
    cols: usize,
    labels: Vec<CellLabel>,
    /// Cluster id to cell count; ids are dense, starting at 1.
    pub cluster_sizes: BTreeMap<u32, usize>,
}

impl SegmentationResult {
    pub fn label(&self, row: usize, col: usize) -> CellLabel {
        self.labels[row * self.cols + col]
    }

    pub fn labels(&self) -> &[CellLabel] {
        &self.labels
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn n_clusters(&self) -> usize {
        self.cluster_sizes.len()
    }

    /// `row,col,label` lines for every valid cell.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("row,col,label\n");
        for r in 0..self.rows {
            for c in 0..self.cols {
                let tag = match self.label(r, c) {
                    CellLabel::Invalid => continue,
                    CellLabel::Ground => "ground".to_owned(),
                    CellLabel::Discarded => "discarded".to_owned(),
                    CellLabel::Cluster(id) => id.to_string(),
                };
                let _ = writeln!(s, "{r},{c},{tag}");
            }
        }
        s
    }
}

/// The segment-connection test for two neighboring returns.
#[inline]
pub fn connects(range_a: f64, range_b: f64, alpha_rad: f64, threshold_deg: f64) -> bool {
    let (d1, d2) = if range_a >= range_b {
        (range_a, range_b)
    } else {
        (range_b, range_a)
    };
    let beta = (d2 * alpha_rad.sin()).atan2(d1 - d2 * alpha_rad.cos());
    beta > threshold_deg.to_radians()
}

/// Angular step between two 4-neighbors: ring spacing when they share a
/// column, column width otherwise.
pub fn neighbor_alpha_rad(image: &RangeImage, a: (usize, usize), b: (usize, usize)) -> f64 {
    let s = image.sensor();
    if a.1 == b.1 {
        s.row_resolution_deg().to_radians()
    } else {
        s.col_resolution_deg().to_radians()
    }
}

pub fn segment_points(
    image: &RangeImage,
    ground: &GroundMask,
    params: &SegmentParams,
) -> SegmentationResult {
    let (rows, cols) = (image.rows(), image.cols());
    assert_eq!(
        (ground.rows(), ground.cols()),
        (rows, cols),
        "mask not aligned"
    );

    let mut labels: Vec<CellLabel> = (0..rows * cols)
        .map(|i| {
            let cell = &image.cells()[i];
            if !cell.valid {
                CellLabel::Invalid
            } else if ground.as_slice()[i] {
                CellLabel::Ground
            } else {
                CellLabel::Discarded
            }
        })
        .collect();
    let eligible = |i: usize, labels: &[CellLabel]| labels[i] == CellLabel::Discarded;

    let mut visited = vec![false; rows * cols];
    let mut cluster_sizes = BTreeMap::new();
    let mut next_id = 1u32;
    let mut queue = VecDeque::new();
    let mut members = Vec::new();

    for r in 0..rows {
        for c in 0..cols {
            let start = r * cols + c;
            if visited[start] || !eligible(start, &labels) {
                continue;
            }
            visited[start] = true;
            members.clear();
            queue.push_back((r, c));
            while let Some((cr, cc)) = queue.pop_front() {
                members.push(cr * cols + cc);
                let range = image.cell(cr, cc).range;
                for (nr, nc) in image.neighbors4(cr, cc) {
                    let ni = nr * cols + nc;
                    if visited[ni] || !eligible(ni, &labels) {
                        continue;
                    }
                    let alpha = neighbor_alpha_rad(image, (cr, cc), (nr, nc));
                    if connects(
                        range,
                        image.cell(nr, nc).range,
                        alpha,
                        params.connect_angle_deg,
                    ) {
                        visited[ni] = true;
                        queue.push_back((nr, nc));
                    }
                }
            }
            if members.len() >= params.min_cluster_size {
                for &i in &members {
                    labels[i] = CellLabel::Cluster(next_id);
                }
                cluster_sizes.insert(next_id, members.len());
                next_id += 1;
            }
        }
    }

    SegmentationResult {
        rows,
        cols,
        labels,
        cluster_sizes,
    }
}
