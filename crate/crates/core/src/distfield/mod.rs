//! Exact distance queries against tagged target boundaries.

mod kdtree;

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::{winding_contribution, Vec2};
use crate::instrument;
use crate::mesh::{BoundaryPolyline, Mesh2D, PointLocator, TagId};

pub use kdtree::KdTree;

/// One target boundary segment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Segment {
    pub a: Vec2,
    pub b: Vec2,
    pub tag: TagId,
    pub loop_id: usize,
}

/// Closest point on a set of segments.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Projection {
    pub point: Vec2,
    pub dist2: f64,
    pub segment: usize,
    pub t: f64,
}

/// Result of projecting a query point onto the closure of one tagged line.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VectorDistanceSample {
    pub query: Vec2,
    pub tag: TagId,
    pub projection: Vec2,
    /// `projection - query`.
    pub d: Vec2,
    pub distance: f64,
}

/// Where error metrics are sampled on the morphed boundary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sampling {
    #[default]
    NodesOnly,
    /// Boundary nodes plus 9 equispaced interior points per edge.
    NodesPlus9,
}

struct Bucket {
    tree: KdTree,
    segments: Vec<usize>,
    max_half: f64,
}

/// Segment index over a target polyline, with one KD-tree per tag and one
/// over all segments. Trees hold segment midpoints; a segment of half
/// length `h` whose midpoint is at distance `r` is at least `r - h` away,
/// which gives an exact pruning radius.
pub struct BoundaryIndex {
    polyline: BoundaryPolyline,
    segments: Vec<Segment>,
    all: Bucket,
    per_tag: Vec<Bucket>,
    /// Loop vertices where the tag changes: (point, tag before, tag after).
    junctions: Vec<(Vec2, TagId, TagId)>,
}

fn bucket(segments: &[Segment], ids: Vec<usize>) -> Bucket {
    let mids: Vec<Vec2> = ids
        .iter()
        .map(|&i| (segments[i].a + segments[i].b) * 0.5)
        .collect();
    let max_half = ids
        .iter()
        .map(|&i| 0.5 * (segments[i].b - segments[i].a).norm())
        .fold(0.0, f64::max);
    Bucket { tree: KdTree::new(&mids), segments: ids, max_half }
}

/// Closest point of segment `s` to `x`, with exact endpoints.
#[inline]
fn segment_projection(x: Vec2, s: &Segment, id: usize) -> Projection {
    let ab = s.b - s.a;
    let l2 = ab.norm2();
    let t = ((x - s.a).dot(ab) / l2).clamp(0.0, 1.0);
    let point = if t == 0.0 {
        s.a
    } else if t == 1.0 {
        s.b
    } else {
        s.a + ab * t
    };
    Projection { point, dist2: (x - point).norm2(), segment: id, t }
}

#[inline]
fn better(p: &Projection, q: &Projection) -> bool {
    p.dist2
        .total_cmp(&q.dist2)
        .then(p.segment.cmp(&q.segment))
        .then(p.t.total_cmp(&q.t))
        .is_lt()
}

impl BoundaryIndex {
    pub fn build(polyline: &BoundaryPolyline) -> Result<Self> {
        let mut segments = Vec::with_capacity(polyline.n_segments());
        let mut junctions = Vec::new();
        for (l, lp) in polyline.loops().iter().enumerate() {
            let n = lp.n_segments();
            for i in 0..n {
                let (a, b) = lp.segment(i);
                segments.push(Segment { a, b, tag: lp.tags[i], loop_id: l });
                let prev = lp.tags[(i + n - 1) % n];
                if prev != lp.tags[i] {
                    junctions.push((a, prev, lp.tags[i]));
                }
            }
        }
        if segments.is_empty() {
            return Err(Error::InvalidPolyline("empty polyline".into()));
        }
        let all = bucket(&segments, (0..segments.len()).collect());
        let per_tag = (0..polyline.tags().len())
            .map(|t| bucket(&segments, (0..segments.len()).filter(|&i| segments[i].tag == t).collect()))
            .collect();
        Ok(BoundaryIndex { polyline: polyline.clone(), segments, all, per_tag, junctions })
    }

    pub fn polyline(&self) -> &BoundaryPolyline {
        &self.polyline
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn tags(&self) -> &[String] {
        self.polyline.tags()
    }

    pub fn tag_id(&self, name: &str) -> Result<TagId> {
        self.polyline.tag_id(name).ok_or_else(|| Error::UnknownTag(name.to_string()))
    }

    fn query(&self, b: &Bucket, x: Vec2) -> Projection {
        instrument::count_distance_queries(1);
        let (k, _) = b.tree.nearest(x).expect("bucket is not empty");
        let mut best = segment_projection(x, &self.segments[b.segments[k]], b.segments[k]);
        let r = best.dist2.sqrt() + b.max_half;
        let r = r + 1e-12 * (1.0 + r);
        b.tree.within(x, r, &mut |k| {
            let s = b.segments[k];
            let p = segment_projection(x, &self.segments[s], s);
            if better(&p, &best) {
                best = p;
            }
        });
        best
    }

    /// Closest point of the whole boundary.
    pub fn closest(&self, x: Vec2) -> Projection {
        self.query(&self.all, x)
    }

    /// Closest point of the closure of the line tagged `tag` (target ids).
    pub fn project(&self, x: Vec2, tag: TagId) -> Result<VectorDistanceSample> {
        let b = self
            .per_tag
            .get(tag)
            .filter(|b| !b.segments.is_empty())
            .ok_or_else(|| Error::UnknownTag(format!("#{tag}")))?;
        let p = self.query(b, x);
        Ok(VectorDistanceSample {
            query: x,
            tag,
            projection: p.point,
            d: p.point - x,
            distance: p.dist2.sqrt(),
        })
    }

    pub fn project_named(&self, x: Vec2, tag: &str) -> Result<VectorDistanceSample> {
        self.project(x, self.tag_id(tag)?)
    }

    /// Whether `x` lies inside the target (odd number of loops wind around it).
    pub fn inside(&self, x: Vec2) -> bool {
        let mut inside = false;
        for lp in self.polyline.loops() {
            let w: i32 = (0..lp.n_segments())
                .map(|i| {
                    let (a, b) = lp.segment(i);
                    winding_contribution(x, a, b)
                })
                .sum();
            inside ^= w != 0;
        }
        inside
    }

    /// Signed distance: negative inside, positive outside.
    pub fn signed_distance(&self, x: Vec2) -> f64 {
        let d = self.closest(x).dist2.sqrt();
        if d > 0.0 && self.inside(x) {
            -d
        } else {
            d
        }
    }

    /// Signed distance with the sign taken from point location in a full
    /// target mesh instead of the boundary winding number.
    pub fn signed_distance_by_mesh(&self, locator: &PointLocator, x: Vec2) -> f64 {
        let d = self.closest(x).dist2.sqrt();
        if d > 0.0 && locator.locate(x).is_some() {
            -d
        } else {
            d
        }
    }

    /// Target vertices where the tag switches between `a` and `b`.
    pub fn junctions_between(&self, a: TagId, b: TagId) -> impl Iterator<Item = Vec2> + '_ {
        self.junctions
            .iter()
            .filter(move |j| (j.1 == a && j.2 == b) || (j.1 == b && j.2 == a))
            .map(|j| j.0)
    }
}

/// Correspondence from reference-mesh tags to target tags, by name.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TagMap {
    to_target: Vec<TagId>,
}

impl TagMap {
    /// Requires both sides to carry exactly the same tag names.
    pub fn new(mesh: &Mesh2D, index: &BoundaryIndex) -> Result<Self> {
        let to_target = mesh
            .tags()
            .iter()
            .map(|t| {
                index
                    .polyline()
                    .tag_id(t)
                    .ok_or_else(|| Error::TagMismatch(format!("target has no line tagged \"{t}\"")))
            })
            .collect::<Result<Vec<_>>>()?;
        for t in index.tags() {
            if mesh.tag_id(t).is_err() {
                return Err(Error::TagMismatch(format!("reference has no line tagged \"{t}\"")));
            }
        }
        Ok(TagMap { to_target })
    }

    #[inline]
    pub fn target(&self, reference_tag: TagId) -> TagId {
        self.to_target[reference_tag]
    }
}

/// Vector distance samples on a morphed boundary.
///
/// A node gets one sample per distinct tag of its incident boundary edges,
/// so junction nodes carry two.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorDistanceField {
    pub samples: Vec<VectorDistanceSample>,
    /// Mesh vertex of each sample.
    pub sample_node: Vec<usize>,
    /// Sample indices at the two endpoints of each boundary edge.
    pub edge_samples: Vec<[usize; 2]>,
}

impl VectorDistanceField {
    pub fn max_distance(&self) -> f64 {
        self.samples.iter().map(|s| s.distance).fold(0.0, f64::max)
    }
}

/// Projects every boundary node of configuration `x` onto its own tag.
pub fn vector_distance_field(
    mesh: &Mesh2D,
    x: &[Vec2],
    index: &BoundaryIndex,
    tags: &TagMap,
) -> Result<VectorDistanceField> {
    let edges = mesh.boundary_edges();
    let mut samples = Vec::new();
    let mut sample_node = Vec::new();
    // Per node: sample of the incoming edge and of the outgoing edge.
    let mut at = vec![[usize::MAX; 2]; mesh.n_vertices()];
    for v in mesh.boundary_vertices() {
        let [ein, eout] = mesh.vertex_boundary_edges(v);
        let (tin, tout) = (edges[ein.unwrap()].tag, edges[eout.unwrap()].tag);
        let mut s = index.project(x[v], tags.target(tin))?;
        s.tag = tin;
        samples.push(s);
        sample_node.push(v);
        at[v] = [samples.len() - 1; 2];
        if tout != tin {
            let mut s = index.project(x[v], tags.target(tout))?;
            s.tag = tout;
            samples.push(s);
            sample_node.push(v);
            at[v][1] = samples.len() - 1;
        }
    }
    let edge_samples = edges.iter().map(|e| [at[e.v[0]][1], at[e.v[1]][0]]).collect();
    Ok(VectorDistanceField { samples, sample_node, edge_samples })
}

/// One displacement per vertex taking boundary nodes onto the target; zero
/// at interior vertices.
///
/// Tracked points go to the target point of the same name, other junction
/// nodes to the nearest target vertex joining the same two tags, and all
/// remaining nodes to their own-tag projection.
pub fn nodal_boundary_displacement(
    mesh: &Mesh2D,
    x: &[Vec2],
    index: &BoundaryIndex,
    tags: &TagMap,
    field: &VectorDistanceField,
) -> Vec<Vec2> {
    let mut out = vec![Vec2::ZERO; mesh.n_vertices()];
    let mut seen = vec![false; mesh.n_vertices()];
    for (k, s) in field.samples.iter().enumerate() {
        let v = field.sample_node[k];
        if seen[v] {
            continue;
        }
        seen[v] = true;
        let [ein, eout] = mesh.vertex_boundary_edges(v);
        let (tin, tout) = (
            mesh.boundary_edges()[ein.unwrap()].tag,
            mesh.boundary_edges()[eout.unwrap()].tag,
        );
        out[v] = s.d;
        if tin != tout {
            let (a, b) = (tags.target(tin), tags.target(tout));
            let mut best: Option<(f64, Vec2)> = None;
            for p in index.junctions_between(a, b) {
                let d2 = (p - x[v]).norm2();
                if best.is_none_or(|b| d2 < b.0) {
                    best = Some((d2, p));
                }
            }
            if let Some((_, p)) = best {
                out[v] = p - x[v];
            }
        }
    }
    for (name, &v) in mesh.tracked_points() {
        if let Some(&p) = index.polyline().points().get(name) {
            out[v] = p - x[v];
        }
    }
    out
}

/// Sample points on the boundary of configuration `x`: nodes, then the
/// interior edge points when requested. Returns `(point, reference tag)`.
fn sample_points(mesh: &Mesh2D, x: &[Vec2], sampling: Sampling) -> Vec<(Vec2, TagId)> {
    let mut pts = Vec::new();
    for e in mesh.boundary_edges() {
        pts.push((x[e.v[0]], e.tag));
        if sampling == Sampling::NodesPlus9 {
            let (a, b) = (x[e.v[0]], x[e.v[1]]);
            for k in 1..10 {
                pts.push((a + (b - a) * (k as f64 / 10.0), e.tag));
            }
        }
    }
    // Edge end nodes: each node is the start of one edge, but a junction
    // node also belongs to the tag of its incoming edge.
    for e in mesh.boundary_edges() {
        pts.push((x[e.v[1]], e.tag));
    }
    pts
}

/// Sup of `|d_Omega|` over the sampled morphed boundary.
pub fn delta1(mesh: &Mesh2D, x: &[Vec2], index: &BoundaryIndex, sampling: Sampling) -> f64 {
    let mut m: f64 = 0.0;
    for v in mesh.boundary_vertices() {
        m = m.max(index.signed_distance(x[v]).abs());
    }
    if sampling == Sampling::NodesPlus9 {
        for e in mesh.boundary_edges() {
            let (a, b) = (x[e.v[0]], x[e.v[1]]);
            for k in 1..10 {
                m = m.max(index.signed_distance(a + (b - a) * (k as f64 / 10.0)).abs());
            }
        }
    }
    m
}

/// Sup of `|D|` over the sampled morphed boundary, each sample projected on
/// its own tag.
pub fn delta2(
    mesh: &Mesh2D,
    x: &[Vec2],
    index: &BoundaryIndex,
    tags: &TagMap,
    sampling: Sampling,
) -> Result<f64> {
    let mut m: f64 = 0.0;
    for (p, t) in sample_points(mesh, x, sampling) {
        m = m.max(index.project(p, tags.target(t))?.distance);
    }
    Ok(m)
}

/// Writes `node,tag,distance` rows for a vector distance field.
pub fn write_distance_csv(
    mesh: &Mesh2D,
    field: &VectorDistanceField,
    path: impl AsRef<Path>,
) -> Result<()> {
    let mut s = String::from("node,tag,distance\n");
    for (k, smp) in field.samples.iter().enumerate() {
        let _ = writeln!(s, "{},{},{:.16e}", field.sample_node[k], mesh.tag_name(smp.tag), smp.distance);
    }
    let path = path.as_ref();
    std::fs::write(path, s).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use std::collections::BTreeMap;

    use super::*;
    use crate::mesh::PolyLoop;

    fn square(h: f64, tag_per_side: bool) -> BoundaryPolyline {
        let pts = vec![
            Vec2::new(-h, -h),
            Vec2::new(h, -h),
            Vec2::new(h, h),
            Vec2::new(-h, h),
        ];
        let (tags, names) = if tag_per_side {
            (vec![0, 1, 2, 3], vec!["s".into(), "e".into(), "n".into(), "w".into()])
        } else {
            (vec![0; 4], vec!["all".into()])
        };
        BoundaryPolyline::from_parts(vec![PolyLoop { points: pts, tags }], names, BTreeMap::new()).unwrap()
    }

    #[test]
    fn unit_segment_projection() {
        let pl = BoundaryPolyline::from_parts(
            vec![PolyLoop {
                points: vec![Vec2::new(0.0, 0.0), Vec2::new(1.0, 0.0), Vec2::new(0.5, -1.0)],
                tags: vec![0, 1, 1],
            }],
            vec!["a".into(), "b".into()],
            BTreeMap::new(),
        )
        .unwrap();
        let idx = BoundaryIndex::build(&pl).unwrap();
        let s = idx.project_named(Vec2::new(0.5, 0.3), "a").unwrap();
        assert_eq!(s.projection, Vec2::new(0.5, 0.0));
        assert!((s.d - Vec2::new(0.0, -0.3)).norm() < 1e-15);
        let s = idx.project_named(Vec2::new(2.0, 0.0), "a").unwrap();
        assert_eq!(s.projection, Vec2::new(1.0, 0.0));
        assert_eq!(s.d, Vec2::new(-1.0, 0.0));
        assert!(idx.project_named(Vec2::ZERO, "zzz").is_err());
    }

    #[test]
    fn square_center_and_vertex() {
        let idx = BoundaryIndex::build(&square(0.5, false)).unwrap();
        assert_eq!(idx.signed_distance(Vec2::ZERO), -0.5);
        assert_eq!(idx.signed_distance(Vec2::new(0.5, 0.5)), 0.0);
        assert_eq!(idx.signed_distance(Vec2::new(1.5, 0.0)), 1.0);
    }

    #[test]
    fn corner_ties_are_deterministic() {
        let idx = BoundaryIndex::build(&square(1.0, false)).unwrap();
        // Equidistant from the south and east sides.
        let q = Vec2::new(0.5, -0.5);
        let p1 = idx.closest(q);
        let p2 = idx.closest(q);
        assert_eq!(p1, p2);
        assert_eq!(p1.segment, 0);
    }
}
