//! Static 2-d tree over points.

use crate::geom::Vec2;

const LEAF: usize = 8;

/// Immutable KD-tree. Points are stored permuted in an implicit layout
/// where each range `[lo, hi)` splits at its midpoint.
#[derive(Debug, Clone)]
pub struct KdTree {
    pts: Vec<Vec2>,
    ids: Vec<usize>,
    /// Split axis of the node whose median sits at this position.
    axis: Vec<u8>,
}

impl KdTree {
    pub fn new(points: &[Vec2]) -> Self {
        let mut items: Vec<(Vec2, usize)> = points.iter().copied().zip(0..).collect();
        let mut axis = vec![0u8; points.len()];
        build(&mut items, 0, &mut axis);
        KdTree {
            pts: items.iter().map(|p| p.0).collect(),
            ids: items.iter().map(|p| p.1).collect(),
            axis,
        }
    }

    pub fn len(&self) -> usize {
        self.pts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pts.is_empty()
    }

    /// Nearest stored point: `(id, squared distance)`; ties go to the
    /// smallest id.
    pub fn nearest(&self, q: Vec2) -> Option<(usize, f64)> {
        let mut best = None;
        self.nearest_in(0, self.pts.len(), q, &mut best);
        best
    }

    fn nearest_in(&self, lo: usize, hi: usize, q: Vec2, best: &mut Option<(usize, f64)>) {
        if hi - lo <= LEAF {
            for k in lo..hi {
                let d2 = (self.pts[k] - q).norm2();
                if best.is_none_or(|(id, b)| d2 < b || (d2 == b && self.ids[k] < id)) {
                    *best = Some((self.ids[k], d2));
                }
            }
            return;
        }
        let mid = (lo + hi) / 2;
        let p = self.pts[mid];
        let diff = if self.axis[mid] == 0 { q.x - p.x } else { q.y - p.y };
        let ((a0, a1), (b0, b1)) = if diff < 0.0 {
            ((lo, mid), (mid + 1, hi))
        } else {
            ((mid + 1, hi), (lo, mid))
        };
        self.nearest_in(a0, a1, q, best);
        let d2 = (p - q).norm2();
        if best.is_none_or(|(id, b)| d2 < b || (d2 == b && self.ids[mid] < id)) {
            *best = Some((self.ids[mid], d2));
        }
        if best.is_none_or(|(_, b)| diff * diff <= b) {
            self.nearest_in(b0, b1, q, best);
        }
    }

    /// Calls `f(id)` for every point within distance `r` of `q`.
    pub fn within(&self, q: Vec2, r: f64, f: &mut impl FnMut(usize)) {
        self.within_in(0, self.pts.len(), q, r, r * r, f);
    }

    fn within_in(&self, lo: usize, hi: usize, q: Vec2, r: f64, r2: f64, f: &mut impl FnMut(usize)) {
        if hi - lo <= LEAF {
            for k in lo..hi {
                if (self.pts[k] - q).norm2() <= r2 {
                    f(self.ids[k]);
                }
            }
            return;
        }
        let mid = (lo + hi) / 2;
        let p = self.pts[mid];
        let diff = if self.axis[mid] == 0 { q.x - p.x } else { q.y - p.y };
        if (p - q).norm2() <= r2 {
            f(self.ids[mid]);
        }
        if diff <= r {
            self.within_in(lo, mid, q, r, r2, f);
        }
        if diff >= -r {
            self.within_in(mid + 1, hi, q, r, r2, f);
        }
    }
}

fn build(items: &mut [(Vec2, usize)], offset: usize, axis: &mut [u8]) {
    let n = items.len();
    if n <= LEAF {
        return;
    }
    let (mut lo, mut hi) = (Vec2::new(f64::MAX, f64::MAX), Vec2::new(f64::MIN, f64::MIN));
    for (p, _) in items.iter() {
        lo = Vec2::new(lo.x.min(p.x), lo.y.min(p.y));
        hi = Vec2::new(hi.x.max(p.x), hi.y.max(p.y));
    }
    let ax = u8::from(hi.y - lo.y > hi.x - lo.x);
    let mid = n / 2;
    let key = |p: &(Vec2, usize)| (if ax == 0 { p.0.x } else { p.0.y }, p.1);
    items.select_nth_unstable_by(mid, |a, b| {
        let (ka, kb) = (key(a), key(b));
        ka.0.total_cmp(&kb.0).then(ka.1.cmp(&kb.1))
    });
    axis[offset + mid] = ax;
    let (left, rest) = items.split_at_mut(mid);
    build(left, offset, axis);
    build(&mut rest[1..], offset + mid + 1, axis);
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let pts: Vec<Vec2> = (0..500).map(|_| Vec2::new(rng.gen(), rng.gen())).collect();
        let tree = KdTree::new(&pts);
        for _ in 0..200 {
            let q = Vec2::new(rng.gen_range(-0.5..1.5), rng.gen_range(-0.5..1.5));
            let (id, d2) = tree.nearest(q).unwrap();
            let bf = pts.iter().map(|p| (*p - q).norm2()).fold(f64::MAX, f64::min);
            assert_eq!(d2, bf);
            assert_eq!((pts[id] - q).norm2(), bf);
            let r = 0.2;
            let mut got = Vec::new();
            tree.within(q, r, &mut |i| got.push(i));
            got.sort();
            let want: Vec<usize> = (0..pts.len()).filter(|&i| (pts[i] - q).norm2() <= r * r).collect();
            assert_eq!(got, want);
        }
    }
}
