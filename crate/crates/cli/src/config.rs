//! Run configuration: a TOML file, `key=value` overrides, then flags.

use std::fs;
use std::path::{Path, PathBuf};

use gloam::lidar_model::io::read_sensor_config;
use gloam::pipeline::{GroundMethod, PipelineConfig};
use gloam::SensorModel;
use serde::Serialize;
use toml::{Table, Value};

use crate::CliError;

/// Keys accepted at the top level of a run config.
const TOP_LEVEL_KEYS: [&str; 5] = ["seed", "sensor", "input", "output", "pipeline"];

/// Fully resolved settings of one run. Serializing it gives the manifest.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub seed: u64,
    /// Sensor config file the model was read from, if any.
    pub sensor_path: Option<PathBuf>,
    pub sensor: SensorModel,
    pub input: Option<PathBuf>,
    pub output: Option<PathBuf>,
    pub pipeline: PipelineConfig,
}

/// Unresolved settings gathered from the command line.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub config: Option<PathBuf>,
    pub set: Vec<String>,
    pub seed: Option<u64>,
    pub sensor: Option<PathBuf>,
    pub input: Option<PathBuf>,
    pub output: Option<PathBuf>,
    pub method: Option<GroundMethod>,
}

impl RunConfig {
    pub fn resolve(ov: &Overrides) -> Result<RunConfig, CliError> {
        let mut doc = match &ov.config {
            Some(path) => {
                let text = fs::read_to_string(path).map_err(|e| {
                    CliError::Data(format!("cannot read config {}: {e}", path.display()))
                })?;
                text.parse::<Table>()
                    .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?
            }
            None => Table::new(),
        };
        for kv in &ov.set {
            apply_set(&mut doc, kv)?;
        }
        if let Some(seed) = ov.seed {
            doc.insert("seed".into(), Value::Integer(seed as i64));
        }
        for (key, path) in [
            ("sensor", &ov.sensor),
            ("input", &ov.input),
            ("output", &ov.output),
        ] {
            if let Some(p) = path {
                doc.insert(key.into(), Value::String(p.display().to_string()));
            }
        }
        if let Some(m) = ov.method {
            set_path(
                &mut doc,
                &["pipeline", "ground_method"],
                Value::String(m.as_str().into()),
            )?;
        }
        Self::from_table(doc)
    }

    fn from_table(mut doc: Table) -> Result<RunConfig, CliError> {
        if let Some(key) = doc.keys().find(|k| !TOP_LEVEL_KEYS.contains(&k.as_str())) {
            return Err(CliError::Data(format!("unknown config key `{key}`")));
        }
        let seed = match doc.remove("seed") {
            None => 0,
            Some(Value::Integer(s)) if s >= 0 => s as u64,
            Some(v) => {
                return Err(CliError::Data(format!(
                    "`seed` must be a nonnegative integer, got {v}"
                )))
            }
        };
        let path_of = |doc: &mut Table, key: &str| -> Result<Option<PathBuf>, CliError> {
            match doc.remove(key) {
                None => Ok(None),
                Some(Value::String(s)) => Ok(Some(PathBuf::from(s))),
                Some(v) => Err(CliError::Data(format!(
                    "`{key}` must be a path string, got {v}"
                ))),
            }
        };
        let sensor_path = path_of(&mut doc, "sensor")?;
        let input = path_of(&mut doc, "input")?;
        let output = path_of(&mut doc, "output")?;

        let sensor = match &sensor_path {
            Some(p) => read_sensor_config(p)?,
            None => SensorModel::vlp16(),
        };
        // sensor-derived defaults first, then whatever the user gave
        let mut pipeline = Value::try_from(PipelineConfig::for_sensor(&sensor))
            .map_err(|e| CliError::Data(format!("cannot encode defaults: {e}")))?;
        if let Some(user) = doc.remove("pipeline") {
            if !user.is_table() {
                return Err(CliError::Data("`pipeline` must be a table".into()));
            }
            merge(&mut pipeline, user);
        }
        let pipeline: PipelineConfig = pipeline.try_into().map_err(|e: toml::de::Error| {
            CliError::Data(format!("pipeline config: {}", e.message()))
        })?;
        pipeline.validate(&sensor)?;

        Ok(RunConfig {
            seed,
            sensor_path,
            sensor,
            input,
            output,
            pipeline,
        })
    }

    pub fn require_input(&self) -> Result<&Path, CliError> {
        let p = self.input.as_deref().ok_or_else(|| {
            CliError::Usage("an input directory is required (--input or `input`)".into())
        })?;
        if !p.is_dir() {
            return Err(CliError::Data(format!(
                "input directory {} does not exist",
                p.display()
            )));
        }
        Ok(p)
    }

    pub fn require_output(&self) -> Result<&Path, CliError> {
        self.output.as_deref().ok_or_else(|| {
            CliError::Usage("an output directory is required (--output or `output`)".into())
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("run config serializes")
    }
}

/// Recursively overlays `src` onto `dst`; tables merge, anything else replaces.
fn merge(dst: &mut Value, src: Value) {
    match (dst, src) {
        (Value::Table(d), Value::Table(s)) => {
            for (k, v) in s {
                match d.get_mut(&k) {
                    Some(existing) => merge(existing, v),
                    None => {
                        d.insert(k, v);
                    }
                }
            }
        }
        (d, s) => *d = s,
    }
}

fn set_path(doc: &mut Table, path: &[&str], value: Value) -> Result<(), CliError> {
    let (last, parents) = path.split_last().expect("nonempty key path");
    let mut table = doc;
    for key in parents {
        let entry = table
            .entry(key.to_string())
            .or_insert_with(|| Value::Table(Table::new()));
        table = entry
            .as_table_mut()
            .ok_or_else(|| CliError::Usage(format!("`{key}` is not a table")))?;
    }
    table.insert(last.to_string(), value);
    Ok(())
}

/// Applies one `dotted.key=value` override. The value is read as a TOML
/// literal when it parses as one and as a bare string otherwise.
fn apply_set(doc: &mut Table, kv: &str) -> Result<(), CliError> {
    let (key, raw) = kv
        .split_once('=')
        .ok_or_else(|| CliError::Usage(format!("--set expects key=value, got {kv:?}")))?;
    let path: Vec<&str> = key.trim().split('.').collect();
    if path.iter().any(|k| k.is_empty()) {
        return Err(CliError::Usage(format!("bad key in --set {kv:?}")));
    }
    let raw = raw.trim();
    let value = format!("v = {raw}")
        .parse::<Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| Value::String(raw.to_owned()));
    set_path(doc, &path, value)
}
