#![allow(dead_code)]

use gloam::feature::FeatureSet;
use gloam::pipeline::{Pipeline, PipelineConfig, StageTimings};
use gloam::synth::{scenes, simulate_scan, ScanTruth};
use gloam::{RigidTransform, SensorModel};

/// Pipeline settings used for 2 cm noise synthetic scans.
pub fn noisy_config() -> PipelineConfig {
    let mut c = PipelineConfig::for_sensor(&SensorModel::vlp16());
    c.segment.connect_angle_deg = 20.0;
    c
}

pub fn scan(scene: &str, pose: &RigidTransform, noise: f64, seed: u64) -> ScanTruth {
    let scene = scenes::load(scene).unwrap();
    simulate_scan(
        &scene.world(),
        pose,
        &scene.mount(),
        &SensorModel::vlp16(),
        noise,
        seed,
    )
    .unwrap()
}

pub fn features(scan: &ScanTruth, config: &PipelineConfig) -> FeatureSet {
    let pipe = Pipeline::new(SensorModel::vlp16(), config.clone()).unwrap();
    pipe.extract(&scan.cloud, &mut StageTimings::default())
        .unwrap()
}

/// Start of the corridor loop: middle of the bottom side, heading +x.
pub fn loop_start() -> RigidTransform {
    RigidTransform::new(
        0.0,
        -scenes::LOOP_SIDES_M.1 / 2.0 - scenes::LOOP_RADIUS_M,
        0.0,
        0.0,
        0.0,
        0.0,
    )
}
