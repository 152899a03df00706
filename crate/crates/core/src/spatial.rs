//! Static 3-D k-d tree for exact nearest-neighbor queries.
//!
//! The tree is an implicit balanced layout over a permutation of the input:
//! the node of a slice `[lo, hi)` is its median `mid`, split on the axis of
//! widest spread. Results are ordered by `(squared distance, item index)`, so
//! queries are deterministic even with duplicate points.

use crate::Point;

#[derive(Debug, Clone, Default)]
pub struct KdTree {
    points: Vec<[f64; 3]>,
    items: Vec<usize>,
    axes: Vec<u8>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Neighbor {
    /// Position of the point in the slice the tree was built from.
    pub index: usize,
    pub dist2: f64,
}

impl KdTree {
    pub fn build(points: &[Point]) -> Self {
        let mut entries: Vec<([f64; 3], usize)> = points
            .iter()
            .enumerate()
            .map(|(i, p)| ([p.x, p.y, p.z], i))
            .collect();
        let mut axes = vec![0u8; entries.len()];
        build_rec(&mut entries, &mut axes, 0);
        KdTree {
            points: entries.iter().map(|e| e.0).collect(),
            items: entries.iter().map(|e| e.1).collect(),
            axes,
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn nearest(&self, q: &Point) -> Option<Neighbor> {
        self.k_nearest(q, 1, f64::INFINITY).into_iter().next()
    }

    /// Up to `k` nearest points with distance `<= radius`, closest first.
    pub fn k_nearest(&self, q: &Point, k: usize, radius: f64) -> Vec<Neighbor> {
        let mut best: Vec<Neighbor> = Vec::with_capacity(k + 1);
        if k == 0 || self.points.is_empty() {
            return best;
        }
        let q = [q.x, q.y, q.z];
        let r2 = radius * radius;
        self.knn_rec(0, self.points.len(), &q, k, r2, &mut best);
        best
    }

    /// Every point with distance `<= radius`, closest first.
    pub fn within(&self, q: &Point, radius: f64) -> Vec<Neighbor> {
        let mut out = Vec::new();
        if self.points.is_empty() {
            return out;
        }
        let q = [q.x, q.y, q.z];
        self.within_rec(0, self.points.len(), &q, radius * radius, &mut out);
        out.sort_by(order);
        out
    }

    fn knn_rec(
        &self,
        lo: usize,
        hi: usize,
        q: &[f64; 3],
        k: usize,
        r2: f64,
        best: &mut Vec<Neighbor>,
    ) {
        if lo >= hi {
            return;
        }
        let mid = lo + (hi - lo) / 2;
        let p = &self.points[mid];
        let d2 = dist2(p, q);
        if d2 <= r2 {
            let cand = Neighbor {
                index: self.items[mid],
                dist2: d2,
            };
            let pos = best.partition_point(|b| order(b, &cand).is_lt());
            if pos < k {
                best.insert(pos, cand);
                best.truncate(k);
            }
        }
        let axis = self.axes[mid] as usize;
        let diff = q[axis] - p[axis];
        let (near, far) = if diff < 0.0 {
            ((lo, mid), (mid + 1, hi))
        } else {
            ((mid + 1, hi), (lo, mid))
        };
        self.knn_rec(near.0, near.1, q, k, r2, best);
        let bound = if best.len() == k {
            best[k - 1].dist2.min(r2)
        } else {
            r2
        };
        if diff * diff <= bound {
            self.knn_rec(far.0, far.1, q, k, r2, best);
        }
    }

    fn within_rec(&self, lo: usize, hi: usize, q: &[f64; 3], r2: f64, out: &mut Vec<Neighbor>) {
        if lo >= hi {
            return;
        }
        let mid = lo + (hi - lo) / 2;
        let p = &self.points[mid];
        let d2 = dist2(p, q);
        if d2 <= r2 {
            out.push(Neighbor {
                index: self.items[mid],
                dist2: d2,
            });
        }
        let axis = self.axes[mid] as usize;
        let diff = q[axis] - p[axis];
        if diff <= 0.0 || diff * diff <= r2 {
            self.within_rec(lo, mid, q, r2, out);
        }
        if diff >= 0.0 || diff * diff <= r2 {
            self.within_rec(mid + 1, hi, q, r2, out);
        }
    }
}

fn order(a: &Neighbor, b: &Neighbor) -> std::cmp::Ordering {
    a.dist2.total_cmp(&b.dist2).then(a.index.cmp(&b.index))
}

#[inline]
fn dist2(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    let d = [a[0] - b[0], a[1] - b[1], a[2] - b[2]];
    d[0] * d[0] + d[1] * d[1] + d[2] * d[2]
}

fn build_rec(entries: &mut [([f64; 3], usize)], axes: &mut [u8], _depth: usize) {
    if entries.len() <= 1 {
        return;
    }
    let mut lo = [f64::INFINITY; 3];
    let mut hi = [f64::NEG_INFINITY; 3];
    for (p, _) in entries.iter() {
        for a in 0..3 {
            lo[a] = lo[a].min(p[a]);
            hi[a] = hi[a].max(p[a]);
        }
    }
    let axis = (0..3)
        .max_by(|&a, &b| (hi[a] - lo[a]).total_cmp(&(hi[b] - lo[b])))
        .unwrap();
    let mid = entries.len() / 2;
    entries.select_nth_unstable_by(mid, |a, b| {
        a.0[axis].total_cmp(&b.0[axis]).then(a.1.cmp(&b.1))
    });
    axes[mid] = axis as u8;
    let (left, right) = entries.split_at_mut(mid);
    let (left_axes, right_axes) = axes.split_at_mut(mid);
    build_rec(left, left_axes, _depth + 1);
    build_rec(&mut right[1..], &mut right_axes[1..], _depth + 1);
}
