//! Scan and sensor-config ingestion.
//!
//! * `.bin`: little-endian `f32` quadruples `x y z intensity` (KITTI layout).
//! * `.pcd`: ASCII PCD with `FIELDS x y z [intensity] [ring]` in any order.
//! * sensor config: TOML with the keys of [`SensorModel`].

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::{PointCloud, SensorModel};
use crate::error::{Error, Result};
use crate::Point;

pub fn read_bin(path: &Path) -> Result<PointCloud> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    parse_bin(&bytes).map_err(|message| Error::Parse {
        path: path.display().to_string(),
        line: 0,
        message,
    })
}

pub fn parse_bin(bytes: &[u8]) -> std::result::Result<PointCloud, String> {
    if !bytes.len().is_multiple_of(16) {
        return Err(format!("{} bytes is not a multiple of 16", bytes.len()));
    }
    let mut points = Vec::with_capacity(bytes.len() / 16);
    let mut intensity = Vec::with_capacity(bytes.len() / 16);
    for (i, rec) in bytes.chunks_exact(16).enumerate() {
        let f = |k: usize| f32::from_le_bytes(rec[4 * k..4 * k + 4].try_into().unwrap());
        let (x, y, z) = (f(0), f(1), f(2));
        if !(x.is_finite() && y.is_finite() && z.is_finite()) {
            return Err(format!("record {i} has non-finite coordinates"));
        }
        points.push(Point::new(x as f64, y as f64, z as f64));
        intensity.push(f(3));
    }
    Ok(PointCloud {
        points,
        rings: None,
        intensity: Some(intensity),
    })
}

pub fn encode_bin(cloud: &PointCloud) -> Vec<u8> {
    let mut out = Vec::with_capacity(cloud.len() * 16);
    for (i, p) in cloud.points.iter().enumerate() {
        let intensity = cloud.intensity.as_ref().map_or(0.0, |v| v[i]);
        for v in [p.x as f32, p.y as f32, p.z as f32, intensity] {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

pub fn write_bin(cloud: &PointCloud, path: &Path) -> Result<()> {
    fs::write(path, encode_bin(cloud)).map_err(|e| Error::io(path, e))
}

pub fn read_pcd(path: &Path) -> Result<PointCloud> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_pcd(&text).map_err(|(line, message)| Error::Parse {
        path: path.display().to_string(),
        line,
        message,
    })
}

/// Parses an ASCII PCD document. Errors carry a 1-based line number.
pub fn parse_pcd(text: &str) -> std::result::Result<PointCloud, (usize, String)> {
    let mut fields: Vec<String> = Vec::new();
    let mut n_points: Option<usize> = None;
    let mut lines = text.lines().enumerate();
    for (ln, line) in lines.by_ref() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut tok = line.split_whitespace();
        match tok.next().unwrap() {
            "FIELDS" => fields = tok.map(str::to_owned).collect(),
            "POINTS" => {
                n_points = Some(
                    tok.next()
                        .and_then(|s| s.parse().ok())
                        .ok_or((ln + 1, "bad POINTS".to_owned()))?,
                )
            }
            "DATA" => {
                if tok.next() != Some("ascii") {
                    return Err((ln + 1, "only DATA ascii is supported".into()));
                }
                break;
            }
            _ => {}
        }
    }
    let col = |name: &str| fields.iter().position(|f| f == name);
    let (Some(ix), Some(iy), Some(iz)) = (col("x"), col("y"), col("z")) else {
        return Err((0, "FIELDS must include x y z".into()));
    };
    let ii = col("intensity");
    let ir = col("ring");

    let mut cloud = PointCloud {
        points: Vec::new(),
        rings: ir.map(|_| Vec::new()),
        intensity: ii.map(|_| Vec::new()),
    };
    for (ln, line) in lines {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let vals: Vec<f64> = line
            .split_whitespace()
            .map(str::parse)
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| (ln + 1, format!("{e}")))?;
        if vals.len() != fields.len() {
            return Err((
                ln + 1,
                format!("expected {} values, got {}", fields.len(), vals.len()),
            ));
        }
        let p = Point::new(vals[ix], vals[iy], vals[iz]);
        if !p.iter().all(|v| v.is_finite()) {
            return Err((ln + 1, "non-finite coordinate".into()));
        }
        cloud.points.push(p);
        if let (Some(i), Some(v)) = (ii, cloud.intensity.as_mut()) {
            v.push(vals[i] as f32);
        }
        if let (Some(i), Some(v)) = (ir, cloud.rings.as_mut()) {
            if vals[i] < 0.0 || vals[i] > u16::MAX as f64 {
                return Err((ln + 1, format!("ring {} out of range", vals[i])));
            }
            v.push(vals[i] as u16);
        }
    }
    if let Some(n) = n_points {
        if n != cloud.len() {
            return Err((
                0,
                format!("header declares {n} points, found {}", cloud.len()),
            ));
        }
    }
    Ok(cloud)
}

pub fn encode_pcd(cloud: &PointCloud) -> String {
    let mut fields = vec!["x", "y", "z"];
    if cloud.intensity.is_some() {
        fields.push("intensity");
    }
    if cloud.rings.is_some() {
        fields.push("ring");
    }
    let n = fields.len();
    let mut s = String::new();
    let _ = writeln!(s, "# .PCD v0.7 - Point Cloud Data file format");
    let _ = writeln!(s, "VERSION 0.7");
    let _ = writeln!(s, "FIELDS {}", fields.join(" "));
    let _ = writeln!(s, "SIZE {}", vec!["4"; n].join(" "));
    let _ = writeln!(s, "TYPE {}", vec!["F"; n].join(" "));
    let _ = writeln!(s, "COUNT {}", vec!["1"; n].join(" "));
    let _ = writeln!(s, "WIDTH {}", cloud.len());
    let _ = writeln!(s, "HEIGHT 1");
    let _ = writeln!(s, "VIEWPOINT 0 0 0 1 0 0 0");
    let _ = writeln!(s, "POINTS {}", cloud.len());
    let _ = writeln!(s, "DATA ascii");
    for (i, p) in cloud.points.iter().enumerate() {
        let _ = write!(s, "{} {} {}", p.x, p.y, p.z);
        if let Some(v) = &cloud.intensity {
            let _ = write!(s, " {}", v[i]);
        }
        if let Some(v) = &cloud.rings {
            let _ = write!(s, " {}", v[i]);
        }
        s.push('\n');
    }
    s
}

pub fn write_pcd(cloud: &PointCloud, path: &Path) -> Result<()> {
    fs::write(path, encode_pcd(cloud)).map_err(|e| Error::io(path, e))
}

/// Reads a scan, dispatching on the file extension (`bin` or `pcd`).
pub fn read_scan(path: &Path) -> Result<PointCloud> {
    match path.extension().and_then(|e| e.to_str()) {
        Some("bin") => read_bin(path),
        Some("pcd") => read_pcd(path),
        _ => Err(Error::InvalidInput(format!(
            "{}: unsupported scan extension (expected .bin or .pcd)",
            path.display()
        ))),
    }
}

pub fn parse_sensor_config(text: &str, origin: &str) -> Result<SensorModel> {
    let sensor: SensorModel = toml::from_str(text).map_err(|e| Error::Config {
        path: origin.to_owned(),
        message: e.to_string(),
    })?;
    sensor.validate()?;
    Ok(sensor)
}

pub fn read_sensor_config(path: &Path) -> Result<SensorModel> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_sensor_config(&text, &path.display().to_string())
}

pub fn encode_sensor_config(sensor: &SensorModel) -> String {
    toml::to_string(sensor).expect("sensor model serializes")
}
