//! Canned scenes shipped with the crate.

use super::Scene;
use crate::error::{Error, Result};

const SCENES: [(&str, &str); 6] = [
    ("flat_ground", include_str!("../../scenes/flat_ground.toml")),
    ("two_slopes", include_str!("../../scenes/two_slopes.toml")),
    (
        "corridor_with_ceiling",
        include_str!("../../scenes/corridor_with_ceiling.toml"),
    ),
    ("lobby", include_str!("../../scenes/lobby.toml")),
    (
        "tilted_mount_corridor",
        include_str!("../../scenes/tilted_mount_corridor.toml"),
    ),
    (
        "corridor_loop",
        include_str!("../../scenes/corridor_loop.toml"),
    ),
];

/// Names of the built-in scenes.
pub fn names() -> impl Iterator<Item = &'static str> {
    SCENES.iter().map(|(n, _)| *n)
}

/// Raw TOML of a built-in scene.
pub fn source(name: &str) -> Option<&'static str> {
    SCENES.iter().find(|(n, _)| *n == name).map(|(_, s)| *s)
}

pub fn load(name: &str) -> Result<Scene> {
    let text = source(name).ok_or_else(|| Error::Config {
        path: name.to_owned(),
        message: format!(
            "unknown scene; expected one of {}",
            names().collect::<Vec<_>>().join(", ")
        ),
    })?;
    Scene::parse(text, name)
}

/// Centerline of `corridor_loop`: straight sides and corner radius.
pub const LOOP_SIDES_M: (f64, f64) = (10.0, 5.575);
pub const LOOP_RADIUS_M: f64 = 3.0;
