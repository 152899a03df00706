//! The four subcommands as plain functions over a resolved [`RunConfig`].

use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use gloam::eval::{
    final_drift, metrics_csv, read_trajectory, write_trajectory, MetricsRow, Trajectory,
};
use gloam::ground::{mask_from_point_flags, mask_metrics};
use gloam::lidar_model::{io::read_scan, project};
use gloam::pipeline::{extract_ground, Pipeline, StageTimings};
use gloam::synth::{
    generate_trajectory_dataset, read_truth_tags, rounded_loop_waypoints, scenes,
    straight_waypoints, write_dataset, Scene,
};
use gloam::RigidTransform;

use crate::{CliError, RunConfig, DEFAULT_RATE_HZ};

pub const GROUND_CSV_HEADER: &str = "scan_id,method,precision,recall,iou,runtime_ms";

fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> Result<(), CliError> {
    fs::write(path, contents)
        .map_err(|e| CliError::Data(format!("cannot write {}: {e}", path.display())))
}

fn create_dir(path: &Path) -> Result<(), CliError> {
    fs::create_dir_all(path)
        .map_err(|e| CliError::Data(format!("cannot create {}: {e}", path.display())))
}

/// `.bin` and `.pcd` files of `dir` in lexicographic filename order.
pub fn list_scans(dir: &Path) -> Result<Vec<PathBuf>, CliError> {
    let entries = fs::read_dir(dir)
        .map_err(|e| CliError::Data(format!("cannot list {}: {e}", dir.display())))?;
    let mut scans = Vec::new();
    for entry in entries {
        let path = entry
            .map_err(|e| CliError::Data(format!("cannot list {}: {e}", dir.display())))?
            .path();
        let is_scan = matches!(
            path.extension().and_then(|e| e.to_str()),
            Some("bin" | "pcd")
        );
        if is_scan && path.is_file() {
            scans.push(path);
        }
    }
    scans.sort_by(|a, b| a.file_name().cmp(&b.file_name()));
    Ok(scans)
}

/// Timestamps from `dir/times.txt` (one per line) or `index / 10 Hz`.
pub fn scan_times(dir: &Path, n: usize) -> Result<Vec<f64>, CliError> {
    let path = dir.join("times.txt");
    if !path.exists() {
        return Ok((0..n).map(|i| i as f64 / DEFAULT_RATE_HZ).collect());
    }
    let text = fs::read_to_string(&path)
        .map_err(|e| CliError::Data(format!("cannot read {}: {e}", path.display())))?;
    let mut times = Vec::with_capacity(n);
    for (ln, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let t: f64 = line.parse().map_err(|_| {
            CliError::Data(format!(
                "{}:{}: not a timestamp: {line:?}",
                path.display(),
                ln + 1
            ))
        })?;
        times.push(t);
    }
    if times.len() != n {
        return Err(CliError::Data(format!(
            "{} lists {} timestamps for {n} scans",
            path.display(),
            times.len()
        )));
    }
    Ok(times)
}

#[derive(Debug, Clone, PartialEq)]
pub struct OdometrySummary {
    pub scans: usize,
    pub fallbacks: usize,
    pub map_warnings: usize,
    pub mean_ms: f64,
}

/// Writes `trajectory.txt`, `timing.csv` and `manifest.toml` to the output
/// directory.
pub fn odometry(config: &RunConfig) -> Result<OdometrySummary, CliError> {
    let input = config.require_input()?;
    let output = config.require_output()?;
    let scans = list_scans(input)?;
    if scans.len() < 2 {
        return Err(CliError::Data(format!(
            "odometry needs at least 2 scans, found {} in {}",
            scans.len(),
            input.display()
        )));
    }
    let times = scan_times(input, scans.len())?;
    create_dir(output)?;

    let mut pipeline = Pipeline::new(config.sensor.clone(), config.pipeline.clone())?;
    let mut poses = Vec::with_capacity(scans.len());
    let mut timing = format!("{}\n", StageTimings::CSV_HEADER);
    let mut total_ms = 0.0;
    for (i, path) in scans.iter().enumerate() {
        let cloud = read_scan(path)
            .map_err(|e| CliError::Data(format!("unreadable scan {}: {e}", path.display())))?;
        let frame = pipeline
            .process(&cloud)
            .map_err(|e| CliError::from(e).with_context(path))?;
        if !frame.pose.is_finite() {
            return Err(CliError::Numerical(format!(
                "non-finite pose at scan {}",
                path.display()
            )));
        }
        poses.push((times[i], frame.pose));
        let _ = writeln!(timing, "{}", frame.timings.csv_row(i));
        total_ms += frame.timings.total_ms();
    }

    let trajectory = Trajectory::new(poses)?;
    write_trajectory(&trajectory, &output.join("trajectory.txt"))?;
    write_file(&output.join("timing.csv"), timing)?;
    let summary = OdometrySummary {
        scans: scans.len(),
        fallbacks: pipeline.fallbacks(),
        map_warnings: pipeline.map_warnings(),
        mean_ms: total_ms / scans.len() as f64,
    };
    let manifest = format!(
        "# gloam {} odometry run\n{}\n[run]\nscans = {}\nfallback_warnings = {}\nmap_warnings = {}\n",
        env!("CARGO_PKG_VERSION"),
        config.to_toml(),
        summary.scans,
        summary.fallbacks,
        summary.map_warnings
    );
    write_file(&output.join("manifest.toml"), manifest)?;
    Ok(summary)
}

/// Runs the configured ground extractor on one scan. Returns the metrics
/// row; precision, recall and IoU are empty without truth.
pub fn ground(config: &RunConfig, scan: &Path, truth: Option<&Path>) -> Result<String, CliError> {
    let cloud = read_scan(scan)?;
    let mut image = project(&cloud, &config.sensor);
    let start = Instant::now();
    let mask = extract_ground(&mut image, &cloud, &config.pipeline)?;
    let runtime_ms = start.elapsed().as_secs_f64() * 1e3;

    let stem = scan
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("scan")
        .to_owned();
    let method = config.pipeline.ground_method.as_str();
    let truth = truth.map(Path::to_path_buf).or_else(|| {
        let p = scan.parent()?.join("truth").join(format!("{stem}.csv"));
        p.exists().then_some(p)
    });
    let metrics = match truth {
        Some(path) => {
            let tags = read_truth_tags(&path)?;
            if tags.len() != cloud.len() {
                return Err(CliError::Data(format!(
                    "{} has {} rows for {} points",
                    path.display(),
                    tags.len(),
                    cloud.len()
                )));
            }
            let flags: Vec<bool> = tags.iter().map(|t| t.is_ground()).collect();
            let m = mask_metrics(&mask, &mask_from_point_flags(&image, &flags))?;
            format!("{:.6},{:.6},{:.6}", m.precision, m.recall, m.iou)
        }
        None => ",,".to_owned(),
    };
    let row = format!("{stem},{method},{metrics},{runtime_ms:.3}");

    let output = config.output.clone().unwrap_or_else(|| PathBuf::from("."));
    create_dir(&output)?;
    write_file(&output.join(format!("{stem}_{method}.pgm")), mask.to_pgm())?;
    let csv = output.join("ground_metrics.csv");
    let fresh = !csv.exists();
    let mut f = fs::OpenOptions::new()
        .create(true)
        .append(true)
        .open(&csv)
        .map_err(|e| CliError::Data(format!("cannot open {}: {e}", csv.display())))?;
    let header = if fresh {
        format!("{GROUND_CSV_HEADER}\n")
    } else {
        String::new()
    };
    writeln!(f, "{header}{row}")
        .map_err(|e| CliError::Data(format!("cannot write {}: {e}", csv.display())))?;
    Ok(row)
}

/// Vehicle poses from `straight:N[:STEP]`, `loop:N` or a TUM file.
pub fn parse_waypoints(spec: &str) -> Result<Vec<RigidTransform>, CliError> {
    let bad = || {
        CliError::Usage(format!(
            "bad waypoints {spec:?}; expected straight:N[:STEP], loop:N or a TUM file"
        ))
    };
    let mut parts = spec.split(':');
    match parts.next() {
        Some("straight") => {
            let n: usize = parts.next().and_then(|s| s.parse().ok()).ok_or_else(bad)?;
            let step: f64 = match parts.next() {
                Some(s) => s.parse().map_err(|_| bad())?,
                None => 0.1,
            };
            if parts.next().is_some() || !step.is_finite() {
                return Err(bad());
            }
            Ok(straight_waypoints(&RigidTransform::identity(), step, n))
        }
        Some("loop") => {
            let n: usize = parts.next().and_then(|s| s.parse().ok()).ok_or_else(bad)?;
            if parts.next().is_some() {
                return Err(bad());
            }
            let (lx, ly) = scenes::LOOP_SIDES_M;
            Ok(rounded_loop_waypoints(lx, ly, scenes::LOOP_RADIUS_M, n))
        }
        _ if Path::new(spec).is_file() => Ok(read_trajectory(Path::new(spec))?
            .poses()
            .iter()
            .map(|(_, p)| *p)
            .collect()),
        _ => Err(bad()),
    }
}

/// Canned scene by name, or a scene file.
pub fn load_scene(arg: &str) -> Result<Scene, CliError> {
    let path = Path::new(arg);
    if path.is_file() {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::Data(format!("cannot read {arg}: {e}")))?;
        return Ok(Scene::parse(&text, arg)?);
    }
    scenes::load(arg).map_err(|_| {
        let names: Vec<&str> = scenes::names().collect();
        CliError::Usage(format!(
            "{arg:?} is neither a scene file nor one of {}",
            names.join(", ")
        ))
    })
}

/// Writes a dataset for `scene` and returns the number of scans.
pub fn synth(
    config: &RunConfig,
    scene: &str,
    waypoints: &str,
    noise_sigma_m: f64,
) -> Result<usize, CliError> {
    if !(noise_sigma_m >= 0.0 && noise_sigma_m.is_finite()) {
        return Err(CliError::Usage(format!(
            "noise must be a nonnegative number, got {noise_sigma_m}"
        )));
    }
    let output = config.require_output()?;
    let scene = load_scene(scene)?;
    let poses = parse_waypoints(waypoints)?;
    let scans = generate_trajectory_dataset(
        &scene.world(),
        &poses,
        &config.sensor,
        &scene.mount(),
        noise_sigma_m,
        config.seed,
    )?;
    create_dir(output)?;
    write_dataset(output, &scans, &config.sensor, DEFAULT_RATE_HZ)?;
    let manifest = format!(
        "scene = {:?}\nwaypoints = {:?}\nnoise_sigma_m = {noise_sigma_m:?}\nseed = {}\nscans = {}\n",
        scene.name,
        waypoints,
        config.seed,
        scans.len()
    );
    write_file(&output.join("synth.toml"), manifest)?;
    Ok(scans.len())
}

/// Distance, drift and percentage as a short report.
pub fn eval(
    estimate: &Path,
    truth: &Path,
    run_id: &str,
    method: &str,
    csv: Option<&Path>,
) -> Result<String, CliError> {
    let est = read_trajectory(estimate)?;
    let tru = read_trajectory(truth)?;
    for (t, p) in [(&est, estimate), (&tru, truth)] {
        if t.is_empty() {
            return Err(CliError::Data(format!("{} has no poses", p.display())));
        }
    }
    let d = final_drift(&est, &tru)?;
    let mut report = String::new();
    let _ = writeln!(report, "distance_m  {:.3}", d.distance_m);
    let _ = writeln!(report, "drift_m     {:.3}", d.drift_m);
    let _ = writeln!(report, "horizontal  {:.3}", d.horizontal_drift_m);
    let _ = writeln!(report, "percentage  {:.4}%", d.percentage);
    let _ = writeln!(report, "paired      {} (skipped {})", d.paired, d.skipped);
    if let Some(path) = csv {
        let row = MetricsRow {
            run_id: run_id.to_owned(),
            method: method.to_owned(),
            distance_m: d.distance_m,
            drift_m: d.drift_m,
            percentage: d.percentage,
        };
        write_file(path, metrics_csv(&[row]))?;
    }
    Ok(report)
}

impl CliError {
    fn with_context(self, path: &Path) -> CliError {
        let p = path.display();
        match self {
            CliError::Usage(m) => CliError::Usage(format!("{p}: {m}")),
            CliError::Data(m) => CliError::Data(format!("{p}: {m}")),
            CliError::Numerical(m) => CliError::Numerical(format!("{p}: {m}")),
        }
    }
}
