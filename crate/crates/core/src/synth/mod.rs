//! Deterministic synthetic LiDAR scans with exact ground truth.
//!
//! Beams are cast from the sensor origin at every ring elevation and at the
//! center azimuth of every column, so a noiseless scan projects back onto the
//! exact cell of its generating beam. Noise is Gaussian and along the beam.
//! Scan `i` of a dataset draws its noise from ChaCha8 stream `i` of the run
//! seed, one draw per beam in row-major order whether or not the beam hits.

pub mod scenes;
mod world;

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use nalgebra::Vector3;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

pub use world::{
    BoxSpec, Hit, MountSpec, PlaneSpec, Primitive, RectSpec, Scene, SemanticTag, SurfaceId, World,
};

use crate::error::{Error, Result};
use crate::eval::{write_trajectory, Trajectory};
use crate::ground::GroundMask;
use crate::lidar_model::{io, PointCloud, RangeImage, SensorModel};
use crate::register::RigidTransform;
use crate::Point;

/// One simulated sweep with per-point truth.
#[derive(Debug, Clone, PartialEq)]
pub struct ScanTruth {
    /// Points in the sensor frame, with ring indices.
    pub cloud: PointCloud,
    pub surface: Vec<SurfaceId>,
    pub tag: Vec<SemanticTag>,
    /// Noiseless range of each point.
    pub range: Vec<f64>,
    /// Generating beam `(row, col)` of each point.
    pub beam: Vec<(usize, usize)>,
    /// World pose of the sensor (`vehicle_pose * mount`).
    pub sensor_pose: RigidTransform,
    pub mount: RigidTransform,
}

impl ScanTruth {
    pub fn len(&self) -> usize {
        self.cloud.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cloud.is_empty()
    }

    /// Truth ground mask on `image`, which must be a projection of this scan.
    pub fn ground_mask(&self, image: &RangeImage) -> GroundMask {
        let flags: Vec<bool> = self.tag.iter().map(|t| t.is_ground()).collect();
        crate::ground::mask_from_point_flags(image, &flags)
    }

    /// `index,row,col,surface,face,tag,range` lines.
    pub fn truth_csv(&self) -> String {
        let mut s = String::from("index,row,col,surface,face,tag,range\n");
        for i in 0..self.len() {
            let (r, c) = self.beam[i];
            let _ = writeln!(
                s,
                "{i},{r},{c},{},{},{},{}",
                self.surface[i].primitive,
                self.surface[i].face,
                self.tag[i].as_str(),
                self.range[i]
            );
        }
        s
    }
}

/// Unit beam direction in the sensor frame.
pub fn beam_direction(sensor: &SensorModel, row: usize, col: usize) -> Vector3<f64> {
    let el = sensor.row_elevation_deg(row).to_radians();
    let az = sensor.col_azimuth_deg(col).to_radians();
    Vector3::new(el.cos() * az.cos(), el.cos() * az.sin(), el.sin())
}

pub fn simulate_scan(
    world: &World,
    vehicle_pose: &RigidTransform,
    mount: &RigidTransform,
    sensor: &SensorModel,
    noise_sigma_m: f64,
    seed: u64,
) -> Result<ScanTruth> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    simulate_with_rng(world, vehicle_pose, mount, sensor, noise_sigma_m, &mut rng)
}

fn simulate_with_rng(
    world: &World,
    vehicle_pose: &RigidTransform,
    mount: &RigidTransform,
    sensor: &SensorModel,
    noise_sigma_m: f64,
    rng: &mut ChaCha8Rng,
) -> Result<ScanTruth> {
    sensor.validate()?;
    if !(noise_sigma_m >= 0.0) {
        return Err(Error::InvalidInput("noise sigma must be >= 0".into()));
    }
    let noise = Normal::new(0.0, noise_sigma_m.max(f64::MIN_POSITIVE))
        .map_err(|e| Error::InvalidInput(e.to_string()))?;
    let sensor_pose = vehicle_pose.compose(mount);
    let rot = sensor_pose.rotation();
    let origin = sensor_pose.translation;

    let mut out = ScanTruth {
        cloud: PointCloud {
            points: Vec::new(),
            rings: Some(Vec::new()),
            intensity: None,
        },
        surface: Vec::new(),
        tag: Vec::new(),
        range: Vec::new(),
        beam: Vec::new(),
        sensor_pose,
        mount: *mount,
    };
    for row in 0..sensor.n_rows {
        for col in 0..sensor.n_cols {
            let draw = noise.sample(rng);
            let d = beam_direction(sensor, row, col);
            let Some(hit) = world.cast(&origin, &(rot * d)) else {
                continue;
            };
            if !sensor.in_range(hit.t) {
                continue;
            }
            let measured = if noise_sigma_m > 0.0 {
                hit.t + draw
            } else {
                hit.t
            };
            out.cloud.points.push(Point::from(d * measured));
            out.cloud.rings.as_mut().unwrap().push(row as u16);
            out.surface.push(hit.surface);
            out.tag.push(hit.tag);
            out.range.push(hit.t);
            out.beam.push((row, col));
        }
    }
    Ok(out)
}

/// One scan per waypoint; scan `i` uses noise stream `i` of `seed`.
pub fn generate_trajectory_dataset(
    world: &World,
    waypoints: &[RigidTransform],
    sensor: &SensorModel,
    mount: &RigidTransform,
    noise_sigma_m: f64,
    seed: u64,
) -> Result<Vec<ScanTruth>> {
    if waypoints.len() < 2 {
        return Err(Error::InvalidInput(
            "a dataset needs at least 2 waypoints".into(),
        ));
    }
    world.validate()?;
    waypoints
        .iter()
        .enumerate()
        .map(|(i, pose)| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i as u64);
            simulate_with_rng(world, pose, mount, sensor, noise_sigma_m, &mut rng)
        })
        .collect()
}

/// Sensor-pose trajectory of a dataset at `rate_hz`.
pub fn truth_trajectory(scans: &[ScanTruth], rate_hz: f64) -> Trajectory {
    Trajectory::new(
        scans
            .iter()
            .enumerate()
            .map(|(i, s)| (i as f64 / rate_hz, s.sensor_pose))
            .collect(),
    )
    .expect("index timestamps are increasing")
}

/// Writes `NNNNNN.bin` scans, `truth/NNNNNN.csv`, `ground_truth.txt` (TUM,
/// sensor poses), `times.txt` and `sensor.toml` into `dir`.
pub fn write_dataset(
    dir: &Path,
    scans: &[ScanTruth],
    sensor: &SensorModel,
    rate_hz: f64,
) -> Result<()> {
    let truth_dir = dir.join("truth");
    fs::create_dir_all(&truth_dir).map_err(|e| Error::io(&truth_dir, e))?;
    let mut times = String::new();
    for (i, scan) in scans.iter().enumerate() {
        io::write_bin(&scan.cloud, &dir.join(format!("{i:06}.bin")))?;
        let p = truth_dir.join(format!("{i:06}.csv"));
        fs::write(&p, scan.truth_csv()).map_err(|e| Error::io(&p, e))?;
        let _ = writeln!(times, "{}", i as f64 / rate_hz);
    }
    let p = dir.join("times.txt");
    fs::write(&p, times).map_err(|e| Error::io(&p, e))?;
    let p = dir.join("sensor.toml");
    fs::write(&p, io::encode_sensor_config(sensor)).map_err(|e| Error::io(&p, e))?;
    write_trajectory(
        &truth_trajectory(scans, rate_hz),
        &dir.join("ground_truth.txt"),
    )
}

/// Reads the per-point semantic tags back from a truth CSV.
pub fn read_truth_tags(path: &Path) -> Result<Vec<SemanticTag>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut tags = Vec::new();
    for (ln, line) in text.lines().enumerate().skip(1) {
        let tag = line
            .split(',')
            .nth(5)
            .and_then(SemanticTag::parse)
            .ok_or_else(|| Error::Parse {
                path: path.display().to_string(),
                line: ln + 1,
                message: "expected a semantic tag in column 6".into(),
            })?;
        tags.push(tag);
    }
    Ok(tags)
}

/// Straight run along +x from `start`, `n` poses `step` meters apart.
pub fn straight_waypoints(start: &RigidTransform, step: f64, n: usize) -> Vec<RigidTransform> {
    (0..n)
        .map(|i| {
            start.compose(&RigidTransform::new(
                step * i as f64,
                0.0,
                0.0,
                0.0,
                0.0,
                0.0,
            ))
        })
        .collect()
}

/// Counter-clockwise rounded-rectangle loop centered at the origin.
///
/// The path has straight sides of length `len_x` and `len_y` joined by
/// quarter circles of radius `radius`; `n` poses are spaced evenly in arc
/// length, starting at the middle of the bottom side heading +x, and the
/// last pose closes the loop on the first.
pub fn rounded_loop_waypoints(
    len_x: f64,
    len_y: f64,
    radius: f64,
    n: usize,
) -> Vec<RigidTransform> {
    use std::f64::consts::FRAC_PI_2;
    let arc = FRAC_PI_2 * radius;
    let (hx, hy) = (len_x / 2.0, len_y / 2.0);
    // segments: (length, kind) walked counter-clockwise from bottom middle
    let perimeter = 2.0 * (len_x + len_y) + 4.0 * arc;
    let pose_at = |s: f64| -> RigidTransform {
        let mut s = s.rem_euclid(perimeter);
        let segs: [(f64, u8); 9] = [
            (hx, 0),
            (arc, 1),
            (len_y, 2),
            (arc, 3),
            (len_x, 4),
            (arc, 5),
            (len_y, 6),
            (arc, 7),
            (hx, 8),
        ];
        for (len, kind) in segs {
            if s > len && kind != 8 {
                s -= len;
                continue;
            }
            let corner = |cx: f64, cy: f64, start_heading: f64| {
                let h = start_heading + s / radius;
                let (x, y) = (
                    cx + radius * (h - FRAC_PI_2).cos(),
                    cy + radius * (h - FRAC_PI_2).sin(),
                );
                RigidTransform::new(x, y, 0.0, 0.0, 0.0, h)
            };
            return match kind {
                0 => RigidTransform::new(s, -hy - radius, 0.0, 0.0, 0.0, 0.0),
                1 => corner(hx, -hy, 0.0),
                2 => RigidTransform::new(hx + radius, -hy + s, 0.0, 0.0, 0.0, FRAC_PI_2),
                3 => corner(hx, hy, FRAC_PI_2),
                4 => RigidTransform::new(hx - s, hy + radius, 0.0, 0.0, 0.0, 2.0 * FRAC_PI_2),
                5 => corner(-hx, hy, 2.0 * FRAC_PI_2),
                6 => RigidTransform::new(-hx - radius, hy - s, 0.0, 0.0, 0.0, 3.0 * FRAC_PI_2),
                7 => corner(-hx, -hy, 3.0 * FRAC_PI_2),
                _ => RigidTransform::new(-hx + s, -hy - radius, 0.0, 0.0, 0.0, 0.0),
            };
        }
        unreachable!("arc length reduced modulo the perimeter")
    };
    (0..n)
        .map(|i| pose_at(perimeter * i as f64 / (n - 1).max(1) as f64))
        .collect()
}
