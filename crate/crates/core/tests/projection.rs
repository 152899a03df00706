mod common;

use gloam::lidar_model::{azimuth_deg, neighbor_vertical_angle, project, vertical_angle};
use gloam::synth::{scenes, simulate_scan};
use gloam::{Point, PointCloud, RigidTransform, SensorModel};
use proptest::prelude::*;

fn point() -> impl Strategy<Value = Point> {
    (-60.0..60.0f64, -60.0..60.0f64, -15.0..15.0f64).prop_map(|(x, y, z)| Point::new(x, y, z))
}

proptest! {
    #[test]
    fn kept_points_survive_projection(points in prop::collection::vec(point(), 1..400)) {
        let sensor = SensorModel::vlp16();
        let image = project(&PointCloud::new(points.clone()), &sensor);
        for cell in image.cells().iter().filter(|c| c.valid) {
            let src = cell.source.unwrap();
            prop_assert_eq!(cell.point, points[src]);
            prop_assert!((cell.range - points[src].coords.norm()).abs() < 1e-6);
            prop_assert!(sensor.in_range(cell.range));
            prop_assert!(!cell.ground && cell.label.is_none());
        }
    }

    #[test]
    fn rows_and_cols_are_monotone(a in point(), b in point()) {
        let s = SensorModel::vlp16();
        let (ea, eb) = (vertical_angle(&a).unwrap(), vertical_angle(&b).unwrap());
        if ea <= eb {
            prop_assert!(s.row_of_elevation(ea) <= s.row_of_elevation(eb));
        }
        let (aa, ab) = (azimuth_deg(&a), azimuth_deg(&b));
        if aa <= ab {
            prop_assert!(s.col_of_azimuth(aa) <= s.col_of_azimuth(ab));
        }
    }

    #[test]
    fn neighbor_angle_is_symmetric(a in point(), b in point()) {
        prop_assume!(a != b);
        prop_assert_eq!(neighbor_vertical_angle(&a, &b).unwrap(), neighbor_vertical_angle(&b, &a).unwrap());
    }
}

#[test]
fn noiseless_scans_project_onto_generating_beams() {
    let sensor = SensorModel::vlp16();
    for name in ["lobby", "two_slopes"] {
        let scene = scenes::load(name).unwrap();
        let pose = RigidTransform::new(0.3, -0.2, 0.0, 0.0, 0.0, 0.4);
        let scan = simulate_scan(&scene.world(), &pose, &scene.mount(), &sensor, 0.0, 0).unwrap();
        // drop ring indices so rows come from elevation alone
        let cloud = PointCloud::new(scan.cloud.points.clone());
        let image = project(&cloud, &sensor);
        for (i, &(row, col)) in scan.beam.iter().enumerate() {
            assert_eq!(image.cell(row, col).source, Some(i), "{name}: point {i}");
        }
    }
}
