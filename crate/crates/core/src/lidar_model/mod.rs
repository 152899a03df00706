//! Sensor geometry and range-image projection.
//!
//! Conventions used throughout the crate:
//!
//! * sensor frame is x forward, y left, z up;
//! * azimuth zero is the sensor +x axis, increasing counter-clockwise seen
//!   from above, normalized to `[0, 360)` degrees;
//! * row 0 is the lowest ring (most negative elevation).

pub mod io;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::Point;

/// Static description of a spinning multi-ring LiDAR.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SensorModel {
    pub n_rows: usize,
    pub n_cols: usize,
    pub fov_min_deg: f64,
    pub fov_max_deg: f64,
    pub min_range_m: f64,
    pub max_range_m: f64,
    /// Number of lowest rows that seed ground clustering.
    pub ground_scan_rows: usize,
}

impl SensorModel {
    /// Velodyne VLP-16: 16 rings over ±15°, 0.2° azimuth bins at 10 Hz.
    pub fn vlp16() -> Self {
        SensorModel {
            n_rows: 16,
            n_cols: 1800,
            fov_min_deg: -15.0,
            fov_max_deg: 15.0,
            min_range_m: 0.3,
            max_range_m: 100.0,
            ground_scan_rows: 4,
        }
    }

    /// Velodyne HDL-64E with a uniform-ring approximation of its 26.9° FOV.
    pub fn hdl64e() -> Self {
        SensorModel {
            n_rows: 64,
            n_cols: 1800,
            fov_min_deg: -24.9,
            fov_max_deg: 2.0,
            min_range_m: 0.5,
            max_range_m: 120.0,
            ground_scan_rows: 16,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: &str| Err(Error::InvalidInput(format!("sensor model: {m}")));
        if self.n_rows < 2 {
            return fail("n_rows must be >= 2");
        }
        if self.n_cols < 4 {
            return fail("n_cols must be >= 4");
        }
        if !(self.fov_min_deg.is_finite() && self.fov_max_deg.is_finite())
            || self.fov_min_deg >= self.fov_max_deg
        {
            return fail("fov_min_deg must be < fov_max_deg");
        }
        if self.ground_scan_rows < 1 || self.ground_scan_rows > self.n_rows {
            return fail("ground_scan_rows must lie in 1..=n_rows");
        }
        if !(self.min_range_m >= 0.0) || self.min_range_m >= self.max_range_m {
            return fail("min_range_m must be >= 0 and < max_range_m");
        }
        Ok(())
    }

    /// Elevation step between adjacent rings, degrees.
    pub fn row_resolution_deg(&self) -> f64 {
        (self.fov_max_deg - self.fov_min_deg) / (self.n_rows - 1) as f64
    }

    /// Azimuth width of one column, degrees.
    pub fn col_resolution_deg(&self) -> f64 {
        360.0 / self.n_cols as f64
    }

    /// Elevation of ring `row`, degrees.
    pub fn row_elevation_deg(&self, row: usize) -> f64 {
        self.fov_min_deg + row as f64 * self.row_resolution_deg()
    }

    /// Azimuth at the center of column `col`, degrees.
    pub fn col_azimuth_deg(&self, col: usize) -> f64 {
        (col as f64 + 0.5) * self.col_resolution_deg()
    }

    pub fn row_of_elevation(&self, elevation_deg: f64) -> usize {
        let r = ((elevation_deg - self.fov_min_deg) / self.row_resolution_deg()).round();
        r.clamp(0.0, (self.n_rows - 1) as f64) as usize
    }

    pub fn col_of_azimuth(&self, azimuth_deg: f64) -> usize {
        let az = azimuth_deg.rem_euclid(360.0);
        let c = (az / 360.0 * self.n_cols as f64).floor() as usize;
        c.min(self.n_cols - 1)
    }

    pub fn in_range(&self, range: f64) -> bool {
        range >= self.min_range_m && range <= self.max_range_m
    }
}

/// An unordered scan in the sensor frame.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PointCloud {
    pub points: Vec<Point>,
    pub rings: Option<Vec<u16>>,
    pub intensity: Option<Vec<f32>>,
}

impl PointCloud {
    pub fn new(points: Vec<Point>) -> Self {
        PointCloud {
            points,
            rings: None,
            intensity: None,
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(i) = self
            .points
            .iter()
            .position(|p| !p.iter().all(|v| v.is_finite()))
        {
            return Err(Error::InvalidInput(format!("point {i} is not finite")));
        }
        for (name, len) in [
            ("rings", self.rings.as_ref().map(Vec::len)),
            ("intensity", self.intensity.as_ref().map(Vec::len)),
        ] {
            if let Some(len) = len {
                if len != self.points.len() {
                    return Err(Error::InvalidInput(format!(
                        "{name} has {len} entries for {} points",
                        self.points.len()
                    )));
                }
            }
        }
        Ok(())
    }
}

/// One range-image cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cell {
    pub range: f64,
    pub point: Point,
    pub valid: bool,
    pub ground: bool,
    /// Segmentation cluster id (`>= 1`) when assigned.
    pub label: Option<u32>,
    /// Index of the source point in the projected cloud.
    pub source: Option<usize>,
}

impl Default for Cell {
    fn default() -> Self {
        Cell {
            range: 0.0,
            point: Point::origin(),
            valid: false,
            ground: false,
            label: None,
            source: None,
        }
    }
}

/// Organized `n_rows x n_cols` view of one sweep, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct RangeImage {
    sensor: SensorModel,
    cells: Vec<Cell>,
}

impl RangeImage {
    pub fn empty(sensor: SensorModel) -> Self {
        let n = sensor.n_rows * sensor.n_cols;
        RangeImage {
            sensor,
            cells: vec![Cell::default(); n],
        }
    }

    pub fn sensor(&self) -> &SensorModel {
        &self.sensor
    }

    pub fn rows(&self) -> usize {
        self.sensor.n_rows
    }

    pub fn cols(&self) -> usize {
        self.sensor.n_cols
    }

    #[inline]
    pub fn index(&self, row: usize, col: usize) -> usize {
        row * self.sensor.n_cols + col
    }

    #[inline]
    pub fn cell(&self, row: usize, col: usize) -> &Cell {
        &self.cells[self.index(row, col)]
    }

    #[inline]
    pub fn cell_mut(&mut self, row: usize, col: usize) -> &mut Cell {
        let i = self.index(row, col);
        &mut self.cells[i]
    }

    pub fn cells(&self) -> &[Cell] {
        &self.cells
    }

    /// Stores `point` in `(row, col)`, marking the cell valid.
    pub fn set_point(&mut self, row: usize, col: usize, point: Point, source: Option<usize>) {
        let cell = self.cell_mut(row, col);
        cell.range = point.coords.norm();
        cell.point = point;
        cell.valid = true;
        cell.source = source;
    }

    pub fn valid_count(&self) -> usize {
        self.cells.iter().filter(|c| c.valid).count()
    }

    /// 4-connected neighbors of `(row, col)`; columns wrap in azimuth.
    pub fn neighbors4(&self, row: usize, col: usize) -> impl Iterator<Item = (usize, usize)> {
        neighbors4(self.rows(), self.cols(), row, col)
    }

    /// Copies a ground mask into the per-cell ground flags.
    pub fn apply_ground(&mut self, mask: &crate::ground::GroundMask) {
        for (cell, &g) in self.cells.iter_mut().zip(mask.as_slice()) {
            cell.ground = g && cell.valid;
        }
    }

    /// Rotates the columns so that new column `c` holds old column `c - shift`.
    pub fn rotate_cols(&self, shift: usize) -> RangeImage {
        let mut out = RangeImage::empty(self.sensor.clone());
        let cols = self.cols();
        for r in 0..self.rows() {
            for c in 0..cols {
                *out.cell_mut(r, (c + shift) % cols) = *self.cell(r, c);
            }
        }
        out
    }
}

/// Up, down, left, right neighbors on a cylinder of `rows x cols` cells.
pub(crate) fn neighbors4(
    rows: usize,
    cols: usize,
    row: usize,
    col: usize,
) -> impl Iterator<Item = (usize, usize)> {
    let left = (row, (col + cols - 1) % cols);
    let right = (row, (col + 1) % cols);
    let down = row.checked_sub(1).map(|r| (r, col));
    let up = (row + 1 < rows).then_some((row + 1, col));
    [down, up, Some(left), Some(right)].into_iter().flatten()
}

/// Elevation of `point` above the sensor horizontal plane, degrees.
pub fn vertical_angle(point: &Point) -> Result<f64> {
    let horiz = point.x.hypot(point.y);
    if horiz == 0.0 && point.z == 0.0 {
        return Err(Error::InvalidInput(
            "vertical angle of the zero point".into(),
        ));
    }
    Ok(point.z.atan2(horiz).to_degrees())
}

/// Inclination of the segment `a -> b`, degrees in `[0, 90]`.
pub fn neighbor_vertical_angle(a: &Point, b: &Point) -> Result<f64> {
    if a == b {
        return Err(Error::InvalidInput(
            "vertical angle between coincident points".into(),
        ));
    }
    Ok(neighbor_angle_unchecked(a, b))
}

#[inline]
pub(crate) fn neighbor_angle_unchecked(a: &Point, b: &Point) -> f64 {
    let d = b - a;
    d.z.abs().atan2(d.x.hypot(d.y)).to_degrees()
}

/// Azimuth of `point` in `[0, 360)` degrees.
pub fn azimuth_deg(point: &Point) -> f64 {
    point.y.atan2(point.x).to_degrees().rem_euclid(360.0)
}

/// Bins `cloud` into a range image.
///
/// Points outside `[min_range_m, max_range_m]` are dropped. When two points
/// land in the same cell the nearer one is kept. A ring index present on the
/// cloud takes precedence over the row computed from elevation.
pub fn project(cloud: &PointCloud, sensor: &SensorModel) -> RangeImage {
    let mut image = RangeImage::empty(sensor.clone());
    for (i, p) in cloud.points.iter().enumerate() {
        let range = p.coords.norm();
        if !sensor.in_range(range) || !range.is_finite() {
            continue;
        }
        let row = match cloud.rings.as_ref().map(|r| r[i] as usize) {
            Some(ring) if ring < sensor.n_rows => ring,
            Some(ring) => {
                log::warn!("point {i} has ring {ring} outside 0..{}", sensor.n_rows);
                continue;
            }
            None => sensor.row_of_elevation(p.z.atan2(p.x.hypot(p.y)).to_degrees()),
        };
        let col = sensor.col_of_azimuth(azimuth_deg(p));
        let cell = image.cell(row, col);
        if !cell.valid || range < cell.range {
            image.set_point(row, col, *p, Some(i));
        }
    }
    image
}
