use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::register::RigidTransform;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SemanticTag {
    Ground,
    Wall,
    Ceiling,
    Slope,
    Object,
}

impl SemanticTag {
    /// Traversable surfaces: the ground-extraction truth.
    pub fn is_ground(self) -> bool {
        matches!(self, SemanticTag::Ground | SemanticTag::Slope)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            SemanticTag::Ground => "ground",
            SemanticTag::Wall => "wall",
            SemanticTag::Ceiling => "ceiling",
            SemanticTag::Slope => "slope",
            SemanticTag::Object => "object",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "ground" => SemanticTag::Ground,
            "wall" => SemanticTag::Wall,
            "ceiling" => SemanticTag::Ceiling,
            "slope" => SemanticTag::Slope,
            "object" => SemanticTag::Object,
            _ => return None,
        })
    }
}

/// Surface identity of a hit: the primitive's id and, for boxes, the face
/// (`2 * axis + side`, side 0 for the min face).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SurfaceId {
    pub primitive: u32,
    pub face: u8,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Primitive {
    /// Infinite plane through `point` with normal `normal`.
    Plane(PlaneSpec),
    /// Parallelogram `origin + a u + b v`, `a, b` in `[0, 1]`.
    Rect(RectSpec),
    /// Axis-aligned box; rays from inside hit its inner faces.
    Box(BoxSpec),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlaneSpec {
    pub surface_id: u32,
    pub tag: SemanticTag,
    pub point: [f64; 3],
    pub normal: [f64; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RectSpec {
    pub surface_id: u32,
    pub tag: SemanticTag,
    pub origin: [f64; 3],
    pub u: [f64; 3],
    pub v: [f64; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoxSpec {
    pub surface_id: u32,
    pub tag: SemanticTag,
    pub min: [f64; 3],
    pub max: [f64; 3],
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hit {
    pub t: f64,
    pub surface: SurfaceId,
    pub tag: SemanticTag,
    /// Unit surface normal at the hit.
    pub normal: Vector3<f64>,
}

const EPS: f64 = 1e-9;

fn v3(a: [f64; 3]) -> Vector3<f64> {
    Vector3::new(a[0], a[1], a[2])
}

impl Primitive {
    pub fn surface_id(&self) -> u32 {
        match self {
            Primitive::Plane(p) => p.surface_id,
            Primitive::Rect(r) => r.surface_id,
            Primitive::Box(b) => b.surface_id,
        }
    }

    pub fn tag(&self) -> SemanticTag {
        match self {
            Primitive::Plane(p) => p.tag,
            Primitive::Rect(r) => r.tag,
            Primitive::Box(b) => b.tag,
        }
    }

    fn validate(&self) -> Result<()> {
        let bad = |m: String| {
            Err(Error::InvalidInput(format!(
                "primitive {}: {m}",
                self.surface_id()
            )))
        };
        match self {
            Primitive::Plane(p) if v3(p.normal).norm() == 0.0 => bad("zero normal".into()),
            Primitive::Rect(r) if v3(r.u).cross(&v3(r.v)).norm() == 0.0 => {
                bad("edges u and v must be non-parallel and nonzero".into())
            }
            Primitive::Box(b) if (0..3).any(|i| !(b.max[i] > b.min[i])) => {
                bad("box extents must be positive".into())
            }
            _ => Ok(()),
        }
    }

    /// First intersection with `t > 0` of the ray `origin + t dir`.
    pub fn intersect(&self, origin: &Vector3<f64>, dir: &Vector3<f64>) -> Option<Hit> {
        let id = |face| SurfaceId {
            primitive: self.surface_id(),
            face,
        };
        match self {
            Primitive::Plane(p) => {
                let n = v3(p.normal).normalize();
                let t = ray_plane(origin, dir, &v3(p.point), &n)?;
                Some(Hit {
                    t,
                    surface: id(0),
                    tag: p.tag,
                    normal: n,
                })
            }
            Primitive::Rect(r) => {
                let (o, u, v) = (v3(r.origin), v3(r.u), v3(r.v));
                let n = u.cross(&v).normalize();
                let t = ray_plane(origin, dir, &o, &n)?;
                let rel = origin + dir * t - o;
                // solve rel = a u + b v in the plane
                let (uu, uv, vv) = (u.dot(&u), u.dot(&v), v.dot(&v));
                let (ru, rv) = (rel.dot(&u), rel.dot(&v));
                let det = uu * vv - uv * uv;
                let a = (ru * vv - rv * uv) / det;
                let b = (rv * uu - ru * uv) / det;
                let inside = |x: f64| (-EPS..=1.0 + EPS).contains(&x);
                (inside(a) && inside(b)).then_some(Hit {
                    t,
                    surface: id(0),
                    tag: r.tag,
                    normal: n,
                })
            }
            Primitive::Box(b) => {
                let (mut t_near, mut t_far) = (f64::NEG_INFINITY, f64::INFINITY);
                let (mut near_face, mut far_face) = (0u8, 0u8);
                for axis in 0..3 {
                    if dir[axis].abs() < 1e-15 {
                        if origin[axis] < b.min[axis] || origin[axis] > b.max[axis] {
                            return None;
                        }
                        continue;
                    }
                    let t0 = (b.min[axis] - origin[axis]) / dir[axis];
                    let t1 = (b.max[axis] - origin[axis]) / dir[axis];
                    let (lo, lo_face, hi, hi_face) = if t0 <= t1 {
                        (t0, 2 * axis as u8, t1, 2 * axis as u8 + 1)
                    } else {
                        (t1, 2 * axis as u8 + 1, t0, 2 * axis as u8)
                    };
                    if lo > t_near {
                        t_near = lo;
                        near_face = lo_face;
                    }
                    if hi < t_far {
                        t_far = hi;
                        far_face = hi_face;
                    }
                }
                if t_near > t_far || t_far <= EPS {
                    return None;
                }
                let (t, face) = if t_near > EPS {
                    (t_near, near_face)
                } else {
                    (t_far, far_face)
                };
                let axis = (face / 2) as usize;
                let mut normal = Vector3::zeros();
                normal[axis] = if face % 2 == 0 { -1.0 } else { 1.0 };
                Some(Hit {
                    t,
                    surface: id(face),
                    tag: b.tag,
                    normal,
                })
            }
        }
    }
}

fn ray_plane(
    origin: &Vector3<f64>,
    dir: &Vector3<f64>,
    p0: &Vector3<f64>,
    n: &Vector3<f64>,
) -> Option<f64> {
    let denom = n.dot(dir);
    if denom.abs() < 1e-12 {
        return None;
    }
    let t = n.dot(&(p0 - origin)) / denom;
    (t > EPS).then_some(t)
}

/// A static scene.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct World {
    #[serde(default)]
    pub name: String,
    #[serde(default, rename = "primitive")]
    pub primitives: Vec<Primitive>,
}

impl World {
    pub fn validate(&self) -> Result<()> {
        self.primitives.iter().try_for_each(Primitive::validate)
    }

    /// Nearest hit along the ray, ties resolved by primitive order.
    pub fn cast(&self, origin: &Vector3<f64>, dir: &Vector3<f64>) -> Option<Hit> {
        let mut best: Option<Hit> = None;
        for p in &self.primitives {
            if let Some(h) = p.intersect(origin, dir) {
                if best.is_none_or(|b| h.t < b.t) {
                    best = Some(h);
                }
            }
        }
        best
    }
}

/// Sensor mount as written in scene files: translation plus roll/pitch/yaw
/// in degrees.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MountSpec {
    pub translation: [f64; 3],
    pub rpy_deg: [f64; 3],
}

impl MountSpec {
    pub fn to_transform(&self) -> RigidTransform {
        let [x, y, z] = self.translation;
        let [r, p, yw] = self.rpy_deg;
        RigidTransform::new(x, y, z, r.to_radians(), p.to_radians(), yw.to_radians())
    }
}

/// A world plus the sensor mount it is meant to be scanned with.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scene {
    #[serde(default)]
    pub name: String,
    pub mount: MountSpec,
    #[serde(default, rename = "primitive")]
    pub primitives: Vec<Primitive>,
}

impl Scene {
    pub fn parse(text: &str, origin: &str) -> Result<Scene> {
        let scene: Scene = toml::from_str(text).map_err(|e| Error::Config {
            path: origin.to_owned(),
            message: e.to_string(),
        })?;
        scene.world().validate()?;
        Ok(scene)
    }

    pub fn world(&self) -> World {
        World {
            name: self.name.clone(),
            primitives: self.primitives.clone(),
        }
    }

    pub fn mount(&self) -> RigidTransform {
        self.mount.to_transform()
    }
}
