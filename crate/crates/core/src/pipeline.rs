//! Stateful per-scan odometry: projection, ground, segmentation, features,
//! frame-to-frame registration and keyframe mapping.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::feature::{select_features, FeatureParams, FeatureSet};
use crate::ground::{
    extract_ground_clustered, extract_ground_gpf, extract_ground_lego, mask_from_point_flags,
    GpfParams, GroundMask, GroundParams,
};
use crate::lidar_model::{project, PointCloud, RangeImage, SensorModel};
use crate::mapping::{refine_against_map, FeatureMap, MappingParams};
use crate::register::{estimate_motion, MatchParams, RigidTransform};
use crate::segment::{segment_points, SegmentParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum GroundMethod {
    #[default]
    Clustered,
    Lego,
    Gpf,
}

impl GroundMethod {
    pub fn as_str(self) -> &'static str {
        match self {
            GroundMethod::Clustered => "clustered",
            GroundMethod::Lego => "lego",
            GroundMethod::Gpf => "gpf",
        }
    }
}

impl std::str::FromStr for GroundMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "clustered" => Ok(GroundMethod::Clustered),
            "lego" => Ok(GroundMethod::Lego),
            "gpf" => Ok(GroundMethod::Gpf),
            _ => Err(Error::InvalidInput(format!(
                "unknown ground method {s:?}; expected clustered, lego or gpf"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct PipelineConfig {
    pub ground_method: GroundMethod,
    pub ground: GroundParams,
    pub gpf: GpfParams,
    pub segment: SegmentParams,
    pub feature: FeatureParams,
    pub matching: MatchParams,
    pub mapping: MappingParams,
}

impl PipelineConfig {
    pub fn for_sensor(sensor: &SensorModel) -> Self {
        PipelineConfig {
            ground: GroundParams::for_sensor(sensor),
            ..Default::default()
        }
    }

    pub fn validate(&self, sensor: &SensorModel) -> Result<()> {
        sensor.validate()?;
        self.ground.validate()?;
        self.gpf.validate()?;
        self.feature.validate(sensor.n_cols)?;
        self.matching.validate()?;
        self.mapping.validate()
    }
}

/// Runs the chosen ground extractor and marks the image cells.
pub fn extract_ground(
    image: &mut RangeImage,
    cloud: &PointCloud,
    config: &PipelineConfig,
) -> Result<GroundMask> {
    let mask = match config.ground_method {
        GroundMethod::Clustered => extract_ground_clustered(image, &config.ground),
        GroundMethod::Lego => extract_ground_lego(image, config.ground.angle_threshold_deg),
        GroundMethod::Gpf => {
            let gpf = extract_ground_gpf(cloud, &config.gpf)?;
            mask_from_point_flags(image, &gpf.ground)
        }
    };
    image.apply_ground(&mask);
    Ok(mask)
}

/// Wall-clock milliseconds per stage.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct StageTimings {
    pub project_ms: f64,
    pub ground_ms: f64,
    pub segment_ms: f64,
    pub feature_ms: f64,
    pub register_ms: f64,
    pub mapping_ms: f64,
}

impl StageTimings {
    pub const CSV_HEADER: &'static str =
        "scan,project_ms,ground_ms,segment_ms,feature_ms,register_ms,mapping_ms,total_ms";

    pub fn total_ms(&self) -> f64 {
        self.project_ms
            + self.ground_ms
            + self.segment_ms
            + self.feature_ms
            + self.register_ms
            + self.mapping_ms
    }

    pub fn csv_row(&self, scan: usize) -> String {
        format!(
            "{scan},{:.3},{:.3},{:.3},{:.3},{:.3},{:.3},{:.3}",
            self.project_ms,
            self.ground_ms,
            self.segment_ms,
            self.feature_ms,
            self.register_ms,
            self.mapping_ms,
            self.total_ms()
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrameResult {
    pub index: usize,
    /// Fused world pose of the sensor.
    pub pose: RigidTransform,
    /// Frame-to-frame registration failed and constant velocity was used.
    pub fallback: bool,
    pub keyframe: bool,
    /// Map refinement replaced the odometry pose.
    pub refined: bool,
    pub map_warning: bool,
    pub n_edges: usize,
    pub n_planars: usize,
    pub timings: StageTimings,
}

fn elapsed_ms(t: Instant) -> f64 {
    t.elapsed().as_secs_f64() * 1e3
}

pub struct Pipeline {
    sensor: SensorModel,
    config: PipelineConfig,
    previous: Option<FeatureSet>,
    pose: RigidTransform,
    velocity: RigidTransform,
    map: FeatureMap,
    last_keyframe: RigidTransform,
    frames: usize,
    fallbacks: usize,
    map_warnings: usize,
}

impl Pipeline {
    pub fn new(sensor: SensorModel, config: PipelineConfig) -> Result<Self> {
        config.validate(&sensor)?;
        let map = FeatureMap::new(config.mapping.voxel_size_m)?;
        Ok(Pipeline {
            sensor,
            config,
            previous: None,
            pose: RigidTransform::identity(),
            velocity: RigidTransform::identity(),
            map,
            last_keyframe: RigidTransform::identity(),
            frames: 0,
            fallbacks: 0,
            map_warnings: 0,
        })
    }

    pub fn config(&self) -> &PipelineConfig {
        &self.config
    }

    pub fn map(&self) -> &FeatureMap {
        &self.map
    }

    /// Frames where registration fell back to constant velocity.
    pub fn fallbacks(&self) -> usize {
        self.fallbacks
    }

    pub fn map_warnings(&self) -> usize {
        self.map_warnings
    }

    /// Projection through feature selection for one scan.
    pub fn extract(&self, cloud: &PointCloud, timings: &mut StageTimings) -> Result<FeatureSet> {
        let t = Instant::now();
        let mut image = project(cloud, &self.sensor);
        timings.project_ms = elapsed_ms(t);

        let t = Instant::now();
        let mask = extract_ground(&mut image, cloud, &self.config)?;
        timings.ground_ms = elapsed_ms(t);

        let t = Instant::now();
        let seg = segment_points(&image, &mask, &self.config.segment);
        timings.segment_ms = elapsed_ms(t);

        let t = Instant::now();
        let features = select_features(&image, &seg, &mask, &self.config.feature)?;
        timings.feature_ms = elapsed_ms(t);
        Ok(features)
    }

    pub fn process(&mut self, cloud: &PointCloud) -> Result<FrameResult> {
        cloud.validate()?;
        let mut timings = StageTimings::default();
        let features = self.extract(cloud, &mut timings)?;
        let index = self.frames;
        self.frames += 1;

        let Some(previous) = self.previous.take() else {
            let t = Instant::now();
            self.map.insert_keyframe(&self.pose, &features)?;
            timings.mapping_ms = elapsed_ms(t);
            let result = self.frame_result(index, &features, false, true, false, false, timings);
            self.previous = Some(features);
            return Ok(result);
        };

        let t = Instant::now();
        let (delta, fallback) =
            match estimate_motion(&features, &previous, &self.velocity, &self.config.matching) {
                Ok(est) if est.transform.is_finite() => (est.transform, false),
                Ok(_) | Err(Error::InsufficientConstraints { .. }) => (self.velocity, true),
                Err(e) => return Err(e),
            };
        timings.register_ms = elapsed_ms(t);
        if fallback {
            self.fallbacks += 1;
            log::warn!("scan {index}: registration fell back to constant velocity");
        }

        let t = Instant::now();
        let mut pose = self.pose.compose(&delta);
        let keyframe = self.config.mapping.is_keyframe(&self.last_keyframe, &pose);
        let (mut refined, mut map_warning) = (false, false);
        if keyframe {
            let r = refine_against_map(
                &pose,
                &features,
                &self.map,
                &self.config.matching,
                &self.config.mapping,
            );
            map_warning = r.warning;
            if r.converged && !r.warning {
                pose = r.pose;
                refined = true;
            }
            if map_warning {
                self.map_warnings += 1;
            }
            self.map.insert_keyframe(&pose, &features)?;
            self.last_keyframe = pose;
        }
        timings.mapping_ms = elapsed_ms(t);

        self.velocity = self.pose.between(&pose);
        self.pose = pose;
        let result = self.frame_result(
            index,
            &features,
            fallback,
            keyframe,
            refined,
            map_warning,
            timings,
        );
        self.previous = Some(features);
        Ok(result)
    }

    #[allow(clippy::too_many_arguments)]
    fn frame_result(
        &self,
        index: usize,
        features: &FeatureSet,
        fallback: bool,
        keyframe: bool,
        refined: bool,
        map_warning: bool,
        timings: StageTimings,
    ) -> FrameResult {
        FrameResult {
            index,
            pose: self.pose,
            fallback,
            keyframe,
            refined,
            map_warning,
            n_edges: features.edges.len(),
            n_planars: features.planars.len(),
            timings,
        }
    }
}
