//! Two-step feature registration.
//!
//! Step 1 refines `(t_z, roll, pitch)` against point-to-plane residuals of
//! planar features (ground planars when there are enough of them); step 2
//! then refines `(t_x, t_y, yaw)` against point-to-edge residuals with the
//! step-1 values held fixed. Each step is a Levenberg-Marquardt loop that
//! re-finds correspondences at every iteration.

mod correspondence;
mod residual;
mod transform;

use std::fmt::Write as _;

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

pub use correspondence::{
    edge_correspondences, find_correspondences, planar_correspondences, FrameTargets, TargetSource,
};
pub use residual::{
    point_to_edge_distance, point_to_plane_distance, Correspondence, ResidualBlock, Target,
};
pub use transform::{normalize_angle, RigidTransform};

use crate::error::{Error, Result, Step};
use crate::feature::{Feature, FeatureSet};

/// Fewest planar correspondences step 1 accepts.
pub const MIN_PLANAR_CORRESPONDENCES: usize = 10;
/// Fewest edge correspondences step 2 accepts.
pub const MIN_EDGE_CORRESPONDENCES: usize = 5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MatchParams {
    /// Largest query-to-`p_j` distance.
    pub max_correspondence_dist_m: f64,
    /// Largest query-to-partner distance for `p_l` and `p_m`.
    pub partner_radius_m: f64,
    pub max_iterations_step1: usize,
    pub max_iterations_step2: usize,
    pub translation_tol_m: f64,
    pub rotation_tol_rad: f64,
    pub lm_initial_damping: f64,
    /// Residuals above `trim_factor * median` get zero weight.
    pub trim_factor: f64,
    /// Lower bound on the trimming threshold, meters.
    pub trim_floor_m: f64,
}

impl Default for MatchParams {
    fn default() -> Self {
        MatchParams {
            max_correspondence_dist_m: 1.0,
            partner_radius_m: 2.5,
            max_iterations_step1: 25,
            max_iterations_step2: 25,
            translation_tol_m: 1e-4,
            rotation_tol_rad: 1e-4,
            lm_initial_damping: 1e-4,
            trim_factor: 3.0,
            trim_floor_m: 1e-3,
        }
    }
}

impl MatchParams {
    pub fn validate(&self) -> Result<()> {
        let all_positive = [
            self.max_correspondence_dist_m,
            self.partner_radius_m,
            self.translation_tol_m,
            self.rotation_tol_rad,
            self.lm_initial_damping,
            self.trim_factor,
        ]
        .iter()
        .all(|&v| v > 0.0)
            && self.trim_floor_m >= 0.0
            && self.max_iterations_step1 > 0
            && self.max_iterations_step2 > 0;
        if !all_positive {
            return Err(Error::InvalidInput(
                "match parameters must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Parameter indices into `[t_x, t_y, t_z, roll, pitch, yaw]` for each step.
fn step_indices(step: Step) -> [usize; 3] {
    match step {
        Step::Planar => [2, 3, 4],
        Step::Edge => [0, 1, 5],
    }
}

/// One LM iteration of one step.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IterationRecord {
    pub step: Step,
    pub iteration: usize,
    pub n_corr: usize,
    pub residual_rms: f64,
    pub cost_before: f64,
    pub cost_after: f64,
    pub accepted: bool,
    pub damping: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub transform: RigidTransform,
    pub converged: bool,
    pub iterations: usize,
    /// Weighted sum of squared residuals and total weight at the final state.
    pub cost: f64,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MotionEstimate {
    pub transform: RigidTransform,
    pub converged: bool,
    pub residual_rms: f64,
    /// Transform after step 1 only.
    pub step1: RigidTransform,
    pub diagnostics: Vec<IterationRecord>,
}

impl MotionEstimate {
    /// `iteration,step,residual_rms,n_corr` lines.
    pub fn diagnostics_csv(&self) -> String {
        let mut s = String::from("iteration,step,residual_rms,n_corr\n");
        for d in &self.diagnostics {
            let step = match d.step {
                Step::Planar => 1,
                Step::Edge => 2,
            };
            let _ = writeln!(
                s,
                "{},{},{},{}",
                d.iteration, step, d.residual_rms, d.n_corr
            );
        }
        s
    }
}

/// Queries used by step 1: ground planars when there are enough, else all.
pub fn step1_queries(features: &FeatureSet) -> Vec<Feature> {
    let ground: Vec<Feature> = features
        .planars
        .iter()
        .filter(|f| f.tag.is_ground())
        .copied()
        .collect();
    if ground.len() >= MIN_PLANAR_CORRESPONDENCES {
        ground
    } else {
        features.planars.clone()
    }
}

/// Frame-to-frame motion: the transform that maps `current` points into the
/// frame of `previous`.
pub fn estimate_motion(
    current: &FeatureSet,
    previous: &FeatureSet,
    init: &RigidTransform,
    params: &MatchParams,
) -> Result<MotionEstimate> {
    if current.is_empty() || previous.is_empty() {
        return Err(Error::InvalidInput("feature sets must be nonempty".into()));
    }
    estimate_motion_with(&FrameTargets::new(previous), current, init, params)
}

/// Two-step estimation against any target source.
pub fn estimate_motion_with<T: TargetSource + ?Sized>(
    targets: &T,
    current: &FeatureSet,
    init: &RigidTransform,
    params: &MatchParams,
) -> Result<MotionEstimate> {
    params.validate()?;
    let mut diagnostics = Vec::new();
    let planar_queries = step1_queries(current);
    let s1 = optimize_step(Step::Planar, init, &mut diagnostics, params, |t| {
        planar_correspondences(targets, &planar_queries, t, params)
    })?;
    let s2 = optimize_step(Step::Edge, &s1.transform, &mut diagnostics, params, |t| {
        edge_correspondences(targets, &current.edges, t, params)
    })?;
    let weight = s1.weight + s2.weight;
    Ok(MotionEstimate {
        transform: s2.transform,
        converged: s1.converged && s2.converged,
        residual_rms: if weight > 0.0 {
            ((s1.cost + s2.cost) / weight).sqrt()
        } else {
            0.0
        },
        step1: s1.transform,
        diagnostics,
    })
}

/// Hard trimming: zero weight above `max(trim_factor * median, trim_floor)`.
pub fn trim_weights(corrs: &mut [Correspondence], at: &RigidTransform, params: &MatchParams) {
    if corrs.is_empty() {
        return;
    }
    let dists: Vec<f64> = corrs.iter().map(|c| c.distance(at)).collect();
    let mut sorted = dists.clone();
    sorted.sort_by(f64::total_cmp);
    let median = sorted[sorted.len() / 2];
    let limit = (params.trim_factor * median).max(params.trim_floor_m);
    for (c, d) in corrs.iter_mut().zip(dists) {
        c.weight = if d <= limit { 1.0 } else { 0.0 };
    }
}

fn weighted_cost(corrs: &[Correspondence], t: &RigidTransform) -> f64 {
    corrs
        .iter()
        .filter(|c| c.weight > 0.0)
        .map(|c| c.weight * c.residual(t).squared_norm())
        .sum()
}

/// Runs the LM loop of one step. `find` returns correspondences for a given
/// state; it is called once per iteration.
pub fn optimize_step<F>(
    step: Step,
    init: &RigidTransform,
    diagnostics: &mut Vec<IterationRecord>,
    params: &MatchParams,
    mut find: F,
) -> Result<StepOutcome>
where
    F: FnMut(&RigidTransform) -> Vec<Correspondence>,
{
    let (max_iter, required) = match step {
        Step::Planar => (params.max_iterations_step1, MIN_PLANAR_CORRESPONDENCES),
        Step::Edge => (params.max_iterations_step2, MIN_EDGE_CORRESPONDENCES),
    };
    let idx = step_indices(step);
    let mut x = *init;
    let mut lambda = params.lm_initial_damping;
    let mut converged = false;
    let mut iterations = 0;
    let mut last = (0.0, 0.0);

    for iteration in 0..max_iter {
        iterations = iteration + 1;
        let mut corrs = find(&x);
        if corrs.len() < required {
            return Err(Error::InsufficientConstraints {
                step,
                found: corrs.len(),
                required,
            });
        }
        trim_weights(&mut corrs, &x, params);

        let mut h = Matrix3::<f64>::zeros();
        let mut g = Vector3::<f64>::zeros();
        let mut cost = 0.0;
        let mut weight = 0.0;
        for c in corrs.iter().filter(|c| c.weight > 0.0) {
            let b = c.residual_and_jacobian(&x);
            for k in 0..b.dim {
                let row = Vector3::new(
                    b.jacobian[(k, idx[0])],
                    b.jacobian[(k, idx[1])],
                    b.jacobian[(k, idx[2])],
                );
                h += c.weight * row * row.transpose();
                g += c.weight * row * b.r[k];
            }
            cost += c.weight * b.squared_norm();
            weight += c.weight;
        }

        let mut accepted = None;
        for _ in 0..12 {
            let damped =
                h + Matrix3::from_diagonal(&(h.diagonal() * lambda + Vector3::repeat(1e-12)));
            let Some(delta) = damped.cholesky().map(|ch| ch.solve(&(-g))) else {
                lambda *= 10.0;
                continue;
            };
            let mut p = x.to_params();
            for k in 0..3 {
                p[idx[k]] += delta[k];
            }
            let candidate = RigidTransform::from_params(&p);
            let new_cost = weighted_cost(&corrs, &candidate);
            if new_cost <= cost {
                lambda = (lambda / 10.0).max(1e-12);
                accepted = Some((candidate, delta, new_cost));
                break;
            }
            lambda *= 10.0;
        }

        let rms = if weight > 0.0 {
            (cost / weight).sqrt()
        } else {
            0.0
        };
        diagnostics.push(IterationRecord {
            step,
            iteration,
            n_corr: corrs.len(),
            residual_rms: rms,
            cost_before: cost,
            cost_after: accepted.as_ref().map_or(cost, |a| a.2),
            accepted: accepted.is_some(),
            damping: lambda,
        });

        let Some((candidate, delta, new_cost)) = accepted else {
            // no descent direction left at this linearization
            last = (cost, weight);
            converged = true;
            break;
        };
        x = candidate;
        last = (new_cost, weight);
        let (mut dt, mut dr) = (0.0f64, 0.0f64);
        for k in 0..3 {
            if idx[k] < 3 {
                dt = dt.hypot(delta[k]);
            } else {
                dr = dr.hypot(delta[k]);
            }
        }
        if dt < params.translation_tol_m && dr < params.rotation_tol_rad {
            converged = true;
            break;
        }
    }

    Ok(StepOutcome {
        transform: x,
        converged,
        iterations,
        cost: last.0,
        weight: last.1,
    })
}
