use std::fs;
use std::path::Path;
use std::process::Command;

fn run(args: &[&str]) -> (i32, String) {
    let mut out = Vec::new();
    let argv = std::iter::once("gloam").chain(args.iter().copied());
    let code = gloam_cli::run(argv.map(std::ffi::OsString::from), &mut out);
    (code, String::from_utf8(out).unwrap())
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn synth(dir: &Path, scene: &str, waypoints: &str, seed: &str) {
    let (code, out) = run(&[
        "synth",
        "--scene",
        scene,
        "--waypoints",
        waypoints,
        "--seed",
        seed,
        "-o",
        p(dir),
    ]);
    assert_eq!(code, 0, "{out}");
}

fn bins(dir: &Path) -> Vec<String> {
    let mut v: Vec<String> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .filter(|n| n.ends_with(".bin"))
        .collect();
    v.sort();
    v
}

#[test]
fn synth_writes_one_scan_per_waypoint() {
    let dir = tempfile::tempdir().unwrap();
    synth(dir.path(), "flat_ground", "straight:10", "3");
    let names = bins(dir.path());
    assert_eq!(names.len(), 10);
    assert_eq!(names[0], "000000.bin");
    for n in &names {
        assert!(dir
            .path()
            .join("truth")
            .join(n.replace(".bin", ".csv"))
            .is_file());
    }
    let truth = fs::read_to_string(dir.path().join("ground_truth.txt")).unwrap();
    assert_eq!(truth.lines().filter(|l| !l.starts_with('#')).count(), 10);
}

#[test]
fn synth_is_reproducible_per_seed() {
    let (a, b, c) = (
        tempfile::tempdir().unwrap(),
        tempfile::tempdir().unwrap(),
        tempfile::tempdir().unwrap(),
    );
    synth(a.path(), "lobby", "straight:3", "9");
    synth(b.path(), "lobby", "straight:3", "9");
    synth(c.path(), "lobby", "straight:3", "10");
    for n in bins(a.path()) {
        let bytes = fs::read(a.path().join(&n)).unwrap();
        assert_eq!(bytes, fs::read(b.path().join(&n)).unwrap(), "{n}");
        assert_ne!(bytes, fs::read(c.path().join(&n)).unwrap(), "{n}");
    }
}

#[test]
fn invalid_world_file_names_the_key() {
    let dir = tempfile::tempdir().unwrap();
    let world = dir.path().join("bad.toml");
    fs::write(&world, "name = \"bad\"\n[mount]\ntranslation = [0.0, 0.0, 0.5]\nrpy_deg = [0.0, 0.0, 0.0]\nwobble = 1\n")
        .unwrap();
    let err = gloam_cli::commands::load_scene(p(&world)).unwrap_err();
    assert!(err.to_string().contains("wobble"), "{err}");
    assert_eq!(err.exit_code(), 2);
    let (code, _) = run(&[
        "synth",
        "--scene",
        p(&world),
        "--waypoints",
        "straight:2",
        "-o",
        p(dir.path()),
    ]);
    assert_eq!(code, 2);
    assert_eq!(
        gloam_cli::commands::load_scene("atlantis")
            .unwrap_err()
            .exit_code(),
        1
    );
}

#[test]
fn ground_reports_full_recall_on_flat_floor() {
    let data = tempfile::tempdir().unwrap();
    let out = tempfile::tempdir().unwrap();
    synth(data.path(), "flat_ground", "straight:2", "1");
    let scan = data.path().join("000000.bin");
    for method in ["clustered", "lego"] {
        let (code, text) = run(&[
            "ground",
            "--scan",
            p(&scan),
            "--method",
            method,
            "-o",
            p(out.path()),
        ]);
        assert_eq!(code, 0, "{text}");
        assert!(out.path().join(format!("000000_{method}.pgm")).is_file());
    }
    let csv = fs::read_to_string(out.path().join("ground_metrics.csv")).unwrap();
    let rows: Vec<Vec<&str>> = csv
        .lines()
        .skip(1)
        .map(|l| l.split(',').collect())
        .collect();
    assert_eq!(
        csv.lines().next().unwrap(),
        gloam_cli::commands::GROUND_CSV_HEADER
    );
    assert_eq!(rows.len(), 2);
    assert_eq!((rows[0][1], rows[1][1]), ("clustered", "lego"));
    assert_eq!(rows[0][3].parse::<f64>().unwrap(), 1.0);
}

#[test]
fn odometry_then_eval_round_trip() {
    let data = tempfile::tempdir().unwrap();
    let out = tempfile::tempdir().unwrap();
    synth(data.path(), "corridor_with_ceiling", "straight:50", "2");
    let config = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/synthetic.toml");
    let (code, text) = run(&[
        "odometry",
        "-c",
        p(&config),
        "-i",
        p(data.path()),
        "-o",
        p(out.path()),
    ]);
    assert_eq!(code, 0, "{text}");
    assert!(text.contains("50 scans"), "{text}");
    let traj = fs::read_to_string(out.path().join("trajectory.txt")).unwrap();
    assert_eq!(traj.lines().filter(|l| !l.starts_with('#')).count(), 50);
    let manifest = fs::read_to_string(out.path().join("manifest.toml")).unwrap();
    assert!(
        manifest.contains("connect_angle_deg = 20.0") && manifest.contains("[run]"),
        "{manifest}"
    );

    let truth = data.path().join("ground_truth.txt");
    let (code, text) = run(&["eval", "--estimate", p(&truth), "--truth", p(&truth)]);
    assert_eq!(code, 0, "{text}");
    assert!(text.contains("drift_m     0.000"), "{text}");
}

#[test]
fn failures_map_to_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    synth(dir.path(), "lobby", "straight:2", "1");
    fs::remove_file(dir.path().join("000001.bin")).unwrap();
    let out = dir.path().join("out");
    assert_eq!(run(&["odometry", "-i", p(dir.path()), "-o", p(&out)]).0, 2);
    assert_ne!(
        run(&["ground", "--scan", p(&dir.path().join("missing.bin"))]).0,
        0
    );
    let empty = dir.path().join("empty.txt");
    fs::write(&empty, "").unwrap();
    assert_ne!(
        run(&["eval", "--estimate", p(&empty), "--truth", p(&empty)]).0,
        0
    );
    assert_eq!(run(&["odometry", "--no-such-flag"]).0, 1);
    assert_eq!(
        run(&[
            "synth",
            "--scene",
            "lobby",
            "--waypoints",
            "zigzag:3",
            "-o",
            p(&out)
        ])
        .0,
        1
    );
}

#[test]
fn binary_reports_errors_on_stderr() {
    let out = Command::new(env!("CARGO_BIN_EXE_gloam"))
        .args([
            "eval",
            "--estimate",
            "/nonexistent/a.txt",
            "--truth",
            "/nonexistent/b.txt",
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("/nonexistent/a.txt"));
}
