//! Roughness scoring and edge/planar feature selection.
//!
//! Roughness of cell `i` in a row of ranges `r`, over the window `S` of
//! `neighbor_half_width` cells on each side (wrapping in azimuth):
//!
//! `c = |sum_{j in S} (r_j - r_i)| / (|S| * r_i)`
//!
//! The image is split into `n_sub_images` equal azimuth sectors. In every
//! sector and row the roughest eligible cells above `c_threshold` become
//! edges and the smoothest below it become planars. Ground cells are never
//! edges; discarded cells are never features.
//!
//! Besides the sparse query features, a [`FeatureSet`] carries denser target
//! tiers (more edges per sector and every smooth cell) that the next frame
//! and the map match against.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ground::GroundMask;
use crate::lidar_model::RangeImage;
use crate::segment::{CellLabel, SegmentationResult};
use crate::Point;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FeatureParams {
    pub neighbor_half_width: usize,
    pub c_threshold: f64,
    pub n_sub_images: usize,
    pub edges_per_row_per_sub: usize,
    pub planars_per_row_per_sub: usize,
    /// Edge targets kept per sector and row for the next frame to match.
    pub edge_targets_per_row_per_sub: usize,
    /// Range jump (m) that marks a depth discontinuity; cells on the far side
    /// of one are not edges.
    pub occlusion_jump_m: f64,
}

impl Default for FeatureParams {
    fn default() -> Self {
        FeatureParams {
            neighbor_half_width: 5,
            c_threshold: 0.1,
            n_sub_images: 6,
            edges_per_row_per_sub: 2,
            planars_per_row_per_sub: 4,
            edge_targets_per_row_per_sub: 20,
            occlusion_jump_m: 0.3,
        }
    }
}

impl FeatureParams {
    pub fn validate(&self, n_cols: usize) -> Result<()> {
        if self.neighbor_half_width == 0
            || self.n_sub_images == 0
            || self.edges_per_row_per_sub == 0
            || self.planars_per_row_per_sub == 0
            || !(self.c_threshold > 0.0)
        {
            return Err(Error::InvalidInput(
                "feature parameters must be positive".into(),
            ));
        }
        if !n_cols.is_multiple_of(self.n_sub_images) {
            return Err(Error::InvalidInput(format!(
                "n_sub_images {} does not divide {n_cols} columns",
                self.n_sub_images
            )));
        }
        Ok(())
    }
}

/// Provenance of a feature: the ground or a segmentation cluster.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Tag {
    Ground,
    Cluster(u32),
}

impl Tag {
    pub fn is_ground(self) -> bool {
        self == Tag::Ground
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Feature {
    pub point: Point,
    pub row: usize,
    pub col: usize,
    pub tag: Tag,
    pub roughness: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct FeatureSet {
    pub edges: Vec<Feature>,
    pub planars: Vec<Feature>,
    pub edge_targets: Vec<Feature>,
    pub planar_targets: Vec<Feature>,
}

impl FeatureSet {
    pub fn is_empty(&self) -> bool {
        self.edges.is_empty() && self.planars.is_empty()
    }
}

/// Roughness of `ranges[i]` over `half_width` neighbors per side with
/// wrap-around. `None` marks the cell ineligible: an invalid cell in the
/// window, a non-positive center range, or a window longer than the row.
pub fn roughness(ranges: &[Option<f64>], i: usize, half_width: usize) -> Option<f64> {
    let n = ranges.len();
    if half_width == 0 || 2 * half_width + 1 > n {
        return None;
    }
    let ri = ranges[i]?;
    if !(ri > 0.0) {
        return None;
    }
    let mut sum = 0.0;
    for k in 1..=half_width {
        sum += ranges[(i + k) % n]? - ri;
        sum += ranges[(i + n - k) % n]? - ri;
    }
    Some(sum.abs() / ((2 * half_width) as f64 * ri))
}

/// Per-cell roughness for one image row.
pub fn row_roughness(image: &RangeImage, row: usize, half_width: usize) -> Vec<Option<f64>> {
    let ranges: Vec<Option<f64>> = (0..image.cols())
        .map(|c| {
            let cell = image.cell(row, c);
            cell.valid.then_some(cell.range)
        })
        .collect();
    (0..ranges.len())
        .map(|i| roughness(&ranges, i, half_width))
        .collect()
}

/// Whether `col` sits behind a depth discontinuity: somewhere within the
/// neighbor window on one side, the range drops by more than
/// `occlusion_jump_m` between two adjacent cells, with the drop facing away
/// from `col`. Such points lie on the far surface next to an occluding edge.
fn occluded(image: &RangeImage, row: usize, col: usize, params: &FeatureParams) -> bool {
    let cols = image.cols();
    let at = |c: usize| image.cell(row, c);
    [1usize, cols - 1].into_iter().any(|step| {
        let mut prev = col;
        for _ in 0..params.neighbor_half_width {
            let next = (prev + step) % cols;
            let (a, b) = (at(prev), at(next));
            if !a.valid || !b.valid {
                return false;
            }
            if a.range - b.range > params.occlusion_jump_m {
                return true;
            }
            prev = next;
        }
        false
    })
}

pub fn select_features(
    image: &RangeImage,
    seg: &SegmentationResult,
    ground: &GroundMask,
    params: &FeatureParams,
) -> Result<FeatureSet> {
    params.validate(image.cols())?;
    let cols = image.cols();
    let width = cols / params.n_sub_images;
    let mut out = FeatureSet::default();

    for row in 0..image.rows() {
        let rough = row_roughness(image, row, params.neighbor_half_width);
        for sub in 0..params.n_sub_images {
            let mut candidates: Vec<Feature> = (sub * width..(sub + 1) * width)
                .filter_map(|col| {
                    let c = rough[col]?;
                    let tag = if ground.get(row, col) {
                        Tag::Ground
                    } else {
                        match seg.label(row, col) {
                            CellLabel::Cluster(id) => Tag::Cluster(id),
                            CellLabel::Ground => Tag::Ground,
                            CellLabel::Discarded | CellLabel::Invalid => return None,
                        }
                    };
                    Some(Feature {
                        point: image.cell(row, col).point,
                        row,
                        col,
                        tag,
                        roughness: c,
                    })
                })
                .collect();

            // roughest first, lower column on ties
            candidates.sort_by(|a, b| b.roughness.total_cmp(&a.roughness).then(a.col.cmp(&b.col)));
            let edge_ok = |f: &&Feature| {
                f.roughness > params.c_threshold
                    && !f.tag.is_ground()
                    && !occluded(image, f.row, f.col, params)
            };
            out.edges.extend(
                candidates
                    .iter()
                    .filter(edge_ok)
                    .take(params.edges_per_row_per_sub),
            );
            out.edge_targets.extend(
                candidates.iter().filter(edge_ok).take(
                    params
                        .edge_targets_per_row_per_sub
                        .max(params.edges_per_row_per_sub),
                ),
            );

            candidates.sort_by(|a, b| a.roughness.total_cmp(&b.roughness).then(a.col.cmp(&b.col)));
            let smooth = candidates
                .iter()
                .filter(|f| f.roughness < params.c_threshold);
            out.planars
                .extend(smooth.clone().take(params.planars_per_row_per_sub));
            out.planar_targets.extend(smooth);
        }
    }
    Ok(out)
}
