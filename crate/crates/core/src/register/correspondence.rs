//! Frame-to-frame correspondence search.
//!
//! For a transformed query point the nearest target of the same kind is
//! `p_j`. Edge queries take `p_l` as the nearest edge target in one of the
//! two rings on either side of `p_j`'s ring. Planar queries take `p_l` as the
//! nearest other target in `p_j`'s ring and `p_m` as the nearest target in a
//! neighboring ring. Planar targets are split by provenance so that ground
//! queries only match ground and cluster queries only match clusters; cluster
//! ids are per-scan, so any two clusters are compatible.

use super::residual::Correspondence;
use super::transform::RigidTransform;
use super::MatchParams;
use crate::feature::{Feature, FeatureSet};
use crate::spatial::KdTree;
use crate::Point;

/// How far (in rings) a partner point may be from `p_j`'s ring.
const RING_SPAN: usize = 2;

/// Source of line and plane targets for a transformed query point.
pub trait TargetSource {
    fn edge_target(
        &self,
        q: &Point,
        query: &Feature,
        params: &MatchParams,
    ) -> Option<(Point, Point)>;

    fn plane_target(
        &self,
        q: &Point,
        query: &Feature,
        params: &MatchParams,
    ) -> Option<(Point, Point, Point)>;
}

/// Features indexed globally and per ring.
#[derive(Debug, Clone, Default)]
struct RingIndex {
    features: Vec<Feature>,
    all: KdTree,
    /// Per ring: tree over the ring's features and their positions in `features`.
    rings: Vec<(KdTree, Vec<usize>)>,
}

impl RingIndex {
    fn new<'a>(features: impl IntoIterator<Item = &'a Feature>) -> Self {
        let features: Vec<Feature> = features.into_iter().copied().collect();
        let n_rings = features.iter().map(|f| f.row + 1).max().unwrap_or(0);
        let mut members = vec![Vec::new(); n_rings];
        for (i, f) in features.iter().enumerate() {
            members[f.row].push(i);
        }
        let rings = members
            .into_iter()
            .map(|idx| {
                let pts: Vec<Point> = idx.iter().map(|&i| features[i].point).collect();
                (KdTree::build(&pts), idx)
            })
            .collect();
        let pts: Vec<Point> = features.iter().map(|f| f.point).collect();
        RingIndex {
            all: KdTree::build(&pts),
            features,
            rings,
        }
    }

    fn nearest(&self, q: &Point, radius: f64) -> Option<usize> {
        self.all.k_nearest(q, 1, radius).first().map(|n| n.index)
    }

    /// Nearest feature in ring `row` other than `exclude`, within `radius` of `q`.
    fn nearest_in_ring(
        &self,
        row: usize,
        q: &Point,
        radius: f64,
        exclude: usize,
    ) -> Option<(usize, f64)> {
        let (tree, idx) = self.rings.get(row)?;
        tree.k_nearest(q, 2, radius)
            .into_iter()
            .map(|n| (idx[n.index], n.dist2))
            .find(|&(i, _)| i != exclude)
    }

    /// Nearest feature within `RING_SPAN` rings of `row`, excluding `row` itself.
    fn nearest_in_nearby_rings(&self, row: usize, q: &Point, radius: f64) -> Option<usize> {
        let lo = row.saturating_sub(RING_SPAN);
        (lo..=row + RING_SPAN)
            .filter(|&r| r != row)
            .filter_map(|r| self.nearest_in_ring(r, q, radius, usize::MAX))
            .min_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)))
            .map(|(i, _)| i)
    }
}

/// Targets built from the previous frame's features.
#[derive(Debug, Clone, Default)]
pub struct FrameTargets {
    edges: RingIndex,
    ground: RingIndex,
    clusters: RingIndex,
}

impl FrameTargets {
    pub fn new(previous: &FeatureSet) -> Self {
        FrameTargets {
            edges: RingIndex::new(&previous.edge_targets),
            ground: RingIndex::new(previous.planar_targets.iter().filter(|f| f.tag.is_ground())),
            clusters: RingIndex::new(
                previous
                    .planar_targets
                    .iter()
                    .filter(|f| !f.tag.is_ground()),
            ),
        }
    }
}

impl TargetSource for FrameTargets {
    fn edge_target(
        &self,
        q: &Point,
        _query: &Feature,
        params: &MatchParams,
    ) -> Option<(Point, Point)> {
        let idx = &self.edges;
        let j = idx.nearest(q, params.max_correspondence_dist_m)?;
        let pj = idx.features[j];
        let l = idx.nearest_in_nearby_rings(pj.row, q, params.partner_radius_m)?;
        Some((pj.point, idx.features[l].point))
    }

    fn plane_target(
        &self,
        q: &Point,
        query: &Feature,
        params: &MatchParams,
    ) -> Option<(Point, Point, Point)> {
        let idx = if query.tag.is_ground() {
            &self.ground
        } else {
            &self.clusters
        };
        let j = idx.nearest(q, params.max_correspondence_dist_m)?;
        let pj = idx.features[j];
        let (l, _) = idx.nearest_in_ring(pj.row, q, params.partner_radius_m, j)?;
        let m = idx.nearest_in_nearby_rings(pj.row, q, params.partner_radius_m)?;
        Some((pj.point, idx.features[l].point, idx.features[m].point))
    }
}

/// Edge correspondences for `queries` under transform `guess`.
pub fn edge_correspondences<T: TargetSource + ?Sized>(
    targets: &T,
    queries: &[Feature],
    guess: &RigidTransform,
    params: &MatchParams,
) -> Vec<Correspondence> {
    queries
        .iter()
        .filter_map(|f| {
            let q = guess.apply(&f.point);
            let (pj, pl) = targets.edge_target(&q, f, params)?;
            Correspondence::edge(f.point, pj, pl).ok()
        })
        .collect()
}

/// Planar correspondences for `queries` under transform `guess`.
pub fn planar_correspondences<T: TargetSource + ?Sized>(
    targets: &T,
    queries: &[Feature],
    guess: &RigidTransform,
    params: &MatchParams,
) -> Vec<Correspondence> {
    queries
        .iter()
        .filter_map(|f| {
            let q = guess.apply(&f.point);
            let (pj, pl, pm) = targets.plane_target(&q, f, params)?;
            Correspondence::planar(f.point, pj, pl, pm).ok()
        })
        .collect()
}

/// Edge pairs followed by planar triples for every current feature that has
/// a compatible previous-frame partner set.
pub fn find_correspondences(
    features: &FeatureSet,
    previous: &FeatureSet,
    guess: &RigidTransform,
    params: &MatchParams,
) -> Vec<Correspondence> {
    let targets = FrameTargets::new(previous);
    let mut out = edge_correspondences(&targets, &features.edges, guess, params);
    out.extend(planar_correspondences(
        &targets,
        &features.planars,
        guess,
        params,
    ));
    out
}
