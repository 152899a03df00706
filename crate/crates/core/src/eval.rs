//! Trajectories, TUM I/O and drift metrics.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use nalgebra::{Quaternion, UnitQuaternion, Vector3};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::register::RigidTransform;

/// Largest timestamp gap accepted when pairing estimate and truth poses.
pub const PAIRING_TOLERANCE_S: f64 = 0.05;

/// Largest deviation of a quaternion norm from 1 accepted on read.
const QUATERNION_NORM_TOL: f64 = 1e-6;

/// Timestamped world-frame poses, timestamps strictly increasing.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Trajectory {
    poses: Vec<(f64, RigidTransform)>,
}

impl Trajectory {
    pub fn new(poses: Vec<(f64, RigidTransform)>) -> Result<Self> {
        for (i, (t, pose)) in poses.iter().enumerate() {
            if !t.is_finite() || !pose.is_finite() {
                return Err(Error::InvalidInput(format!("pose {i} is not finite")));
            }
            if i > 0 && *t <= poses[i - 1].0 {
                return Err(Error::InvalidInput(format!(
                    "timestamps must increase strictly (pose {i}: {t} after {})",
                    poses[i - 1].0
                )));
            }
        }
        Ok(Trajectory { poses })
    }

    pub fn poses(&self) -> &[(f64, RigidTransform)] {
        &self.poses
    }

    pub fn len(&self) -> usize {
        self.poses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.poses.is_empty()
    }

    /// Left-multiplies every pose by `t`.
    pub fn transformed(&self, t: &RigidTransform) -> Trajectory {
        Trajectory {
            poses: self.poses.iter().map(|(s, p)| (*s, t.compose(p))).collect(),
        }
    }

    /// Index of the pose closest in time to `t`, if within `tol`.
    /// Ties go to the earlier pose.
    pub fn nearest_index(&self, t: f64, tol: f64) -> Option<usize> {
        let i = self.poses.partition_point(|(s, _)| *s < t);
        [i.checked_sub(1), Some(i)]
            .into_iter()
            .flatten()
            .filter(|&k| k < self.poses.len())
            .map(|k| (k, (self.poses[k].0 - t).abs()))
            .filter(|&(_, d)| d <= tol)
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .map(|(k, _)| k)
    }
}

/// Sum of distances between consecutive positions.
pub fn path_length(t: &Trajectory) -> Result<f64> {
    if t.len() < 2 {
        return Err(Error::InvalidInput(
            "path length needs at least 2 poses".into(),
        ));
    }
    Ok(t.poses
        .windows(2)
        .map(|w| (w[1].1.translation - w[0].1.translation).norm())
        .sum())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DriftReport {
    /// Path length of the truth trajectory.
    pub distance_m: f64,
    /// 3D distance between the final paired positions.
    pub drift_m: f64,
    /// Drift in the truth xy plane only.
    pub horizontal_drift_m: f64,
    /// `100 * drift_m / distance_m`.
    pub percentage: f64,
    pub paired: usize,
    /// Estimate poses without a truth pose within the pairing tolerance.
    pub skipped: usize,
}

/// Final drift of `estimate` against `truth`.
///
/// Poses are paired by nearest timestamp within [`PAIRING_TOLERANCE_S`].
/// The estimate is aligned on the first pair by left-multiplying it with
/// `truth_start * estimate_start^-1`; drift is measured on the last pair.
pub fn final_drift(estimate: &Trajectory, truth: &Trajectory) -> Result<DriftReport> {
    if estimate.is_empty() || truth.is_empty() {
        return Err(Error::InvalidInput(
            "drift needs nonempty trajectories".into(),
        ));
    }
    let distance_m = path_length(truth)?;
    if !(distance_m > 0.0) {
        return Err(Error::InvalidInput(
            "truth trajectory has zero length".into(),
        ));
    }
    let pairs: Vec<(usize, usize)> = estimate
        .poses
        .iter()
        .enumerate()
        .filter_map(|(i, (t, _))| truth.nearest_index(*t, PAIRING_TOLERANCE_S).map(|j| (i, j)))
        .collect();
    let (Some(&(e0, t0)), Some(&(e1, t1))) = (pairs.first(), pairs.last()) else {
        return Err(Error::InvalidInput(
            "no estimate pose has a truth pose within the pairing tolerance".into(),
        ));
    };
    let align = truth.poses[t0].1.compose(&estimate.poses[e0].1.inverse());
    let end = align.compose(&estimate.poses[e1].1).translation;
    let err = end - truth.poses[t1].1.translation;
    let drift_m = err.norm();
    Ok(DriftReport {
        distance_m,
        drift_m,
        horizontal_drift_m: err.xy().norm(),
        percentage: drift_m / distance_m * 100.0,
        paired: pairs.len(),
        skipped: estimate.len() - pairs.len(),
    })
}

/// Parses TUM text: `timestamp tx ty tz qx qy qz qw` per line, `#` comments.
pub fn parse_trajectory(text: &str, origin: &str) -> Result<Trajectory> {
    let mut poses = Vec::new();
    for (ln, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let err = |message: String| Error::Parse {
            path: origin.to_owned(),
            line: ln + 1,
            message,
        };
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 8 {
            return Err(err(format!("expected 8 fields, found {}", fields.len())));
        }
        let mut v = [0.0; 8];
        for (slot, f) in v.iter_mut().zip(&fields) {
            *slot = f
                .parse::<f64>()
                .ok()
                .filter(|x| x.is_finite())
                .ok_or_else(|| err(format!("not a finite number: {f:?}")))?;
        }
        let q = Quaternion::new(v[7], v[4], v[5], v[6]);
        if (q.norm() - 1.0).abs() > QUATERNION_NORM_TOL {
            return Err(err(format!("quaternion norm {} is not 1", q.norm())));
        }
        let pose = RigidTransform::from_quaternion(
            &UnitQuaternion::from_quaternion(q),
            Vector3::new(v[1], v[2], v[3]),
        );
        if let Some((prev, _)) = poses.last() {
            if v[0] <= *prev {
                return Err(err(format!("timestamp {} does not increase", v[0])));
            }
        }
        poses.push((v[0], pose));
    }
    Trajectory::new(poses)
}

pub fn read_trajectory(path: &Path) -> Result<Trajectory> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_trajectory(&text, &path.display().to_string())
}

/// TUM text with shortest round-trip float formatting.
pub fn encode_trajectory(t: &Trajectory) -> String {
    let mut s = String::from("# timestamp tx ty tz qx qy qz qw\n");
    for (time, pose) in &t.poses {
        let q = pose.quaternion();
        let tr = pose.translation;
        let _ = writeln!(
            s,
            "{} {} {} {} {} {} {} {}",
            time, tr.x, tr.y, tr.z, q.i, q.j, q.k, q.w
        );
    }
    s
}

pub fn write_trajectory(t: &Trajectory, path: &Path) -> Result<()> {
    fs::write(path, encode_trajectory(t)).map_err(|e| Error::io(path, e))
}

/// One row of the metrics table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricsRow {
    pub run_id: String,
    pub method: String,
    pub distance_m: f64,
    pub drift_m: f64,
    pub percentage: f64,
}

pub fn metrics_csv(rows: &[MetricsRow]) -> String {
    let mut s = String::from("run_id,method,distance_m,drift_m,percentage\n");
    for r in rows {
        let _ = writeln!(
            s,
            "{},{},{:.3},{:.3},{:.4}",
            r.run_id, r.method, r.distance_m, r.drift_m, r.percentage
        );
    }
    s
}
