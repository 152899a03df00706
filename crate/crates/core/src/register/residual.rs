//! Point-to-edge and point-to-plane distances and their LM residual blocks.

use nalgebra::{Matrix3, Matrix3x6, Vector3};

use super::transform::{rotation_derivatives, RigidTransform};
use crate::error::{Error, Result};
use crate::Point;

/// Relative tolerance below which line/plane support points are degenerate.
const DEGENERATE_EPS: f64 = 1e-12;

/// Distance from `p` to the line through `pj` and `pl`:
/// `|(p - pj) x (p - pl)| / |pj - pl|`.
pub fn point_to_edge_distance(p: &Point, pj: &Point, pl: &Point) -> Result<f64> {
    let base = (pj - pl).norm();
    if !(base > DEGENERATE_EPS * (pj.coords.norm() + pl.coords.norm()).max(1.0)) {
        return Err(Error::InvalidInput("edge support points coincide".into()));
    }
    Ok((p - pj).cross(&(p - pl)).norm() / base)
}

/// Distance from `p` to the plane through `pj`, `pl`, `pm`:
/// `|(p - pj) . n| / |n|` with `n = (pj - pl) x (pj - pm)`.
pub fn point_to_plane_distance(p: &Point, pj: &Point, pl: &Point, pm: &Point) -> Result<f64> {
    let n = plane_normal(pj, pl, pm)?;
    Ok((p - pj).dot(&n).abs())
}

fn plane_normal(pj: &Point, pl: &Point, pm: &Point) -> Result<Vector3<f64>> {
    let a = pj - pl;
    let b = pj - pm;
    let n = a.cross(&b);
    let scale = a.norm() * b.norm();
    if !(n.norm() > DEGENERATE_EPS * scale) || scale == 0.0 {
        return Err(Error::DegeneratePlane(
            "plane support points are collinear".into(),
        ));
    }
    Ok(n.normalize())
}

/// Target geometry in the reference frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Target {
    Line { pj: Point, pl: Point },
    Plane { pj: Point, pl: Point, pm: Point },
}

/// A current-frame point paired with reference-frame geometry.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Correspondence {
    pub query: Point,
    pub target: Target,
    pub weight: f64,
}

/// Residual vector and its Jacobian with respect to
/// `[t_x, t_y, t_z, roll, pitch, yaw]`. Only the first `dim` rows are used:
/// one for planes (signed distance), three for lines (perpendicular offset).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResidualBlock {
    pub dim: usize,
    pub r: Vector3<f64>,
    pub jacobian: Matrix3x6<f64>,
}

impl ResidualBlock {
    pub fn squared_norm(&self) -> f64 {
        self.r.rows(0, self.dim).norm_squared()
    }
}

impl Correspondence {
    pub fn edge(query: Point, pj: Point, pl: Point) -> Result<Self> {
        point_to_edge_distance(&query, &pj, &pl)?;
        Ok(Correspondence {
            query,
            target: Target::Line { pj, pl },
            weight: 1.0,
        })
    }

    pub fn planar(query: Point, pj: Point, pl: Point, pm: Point) -> Result<Self> {
        plane_normal(&pj, &pl, &pm)?;
        Ok(Correspondence {
            query,
            target: Target::Plane { pj, pl, pm },
            weight: 1.0,
        })
    }

    pub fn is_edge(&self) -> bool {
        matches!(self.target, Target::Line { .. })
    }

    /// Unsigned distance of the transformed query to the target.
    pub fn distance(&self, t: &RigidTransform) -> f64 {
        let q = t.apply(&self.query);
        match &self.target {
            Target::Line { pj, pl } => point_to_edge_distance(&q, pj, pl).unwrap_or(f64::INFINITY),
            Target::Plane { pj, pl, pm } => {
                point_to_plane_distance(&q, pj, pl, pm).unwrap_or(f64::INFINITY)
            }
        }
    }

    /// Residual only, without derivatives.
    pub fn residual(&self, t: &RigidTransform) -> ResidualBlock {
        self.block(t, false)
    }

    pub fn residual_and_jacobian(&self, t: &RigidTransform) -> ResidualBlock {
        self.block(t, true)
    }

    fn block(&self, t: &RigidTransform, with_jacobian: bool) -> ResidualBlock {
        let q = t.apply(&self.query);
        // d q / d params: identity for translation, dR/dangle * p for angles
        let dq = |out: &mut Matrix3x6<f64>| {
            out.fixed_view_mut::<3, 3>(0, 0)
                .copy_from(&Matrix3::identity());
            for (k, d) in rotation_derivatives(t).iter().enumerate() {
                out.set_column(3 + k, &(d * self.query.coords));
            }
        };
        let mut block = ResidualBlock {
            dim: 1,
            r: Vector3::zeros(),
            jacobian: Matrix3x6::zeros(),
        };
        match &self.target {
            Target::Plane { pj, pl, pm } => {
                let n = plane_normal(pj, pl, pm).expect("validated at construction");
                block.r[0] = (q - pj).dot(&n);
                if with_jacobian {
                    let mut d = Matrix3x6::zeros();
                    dq(&mut d);
                    block.jacobian.set_row(0, &(n.transpose() * d));
                }
            }
            Target::Line { pj, pl } => {
                let dir = (pl - pj).normalize();
                let proj = Matrix3::identity() - dir * dir.transpose();
                block.dim = 3;
                block.r = proj * (q - pj);
                if with_jacobian {
                    let mut d = Matrix3x6::zeros();
                    dq(&mut d);
                    block.jacobian = proj * d;
                }
            }
        }
        block
    }
}
