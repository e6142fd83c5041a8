//! Triangle meshes with tagged boundary lines and tracked boundary points.

mod interp;
mod io;
mod polyline;
mod quality;
mod synth;

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::{orient2, segments_intersect, Vec2};

pub use interp::{interpolate_morphing, Interpolation, PointLocator};
pub use io::{export_vtk, load_mesh, read_json, save_mesh, to_json_string, write_atomic, write_json, NodalField};
pub use polyline::{BoundaryPolyline, PolyLoop};
pub use quality::{mask_touching_tag, shape_regularity, QualityReport};
pub use synth::{
    airfoil_family, halton, naca4_profile, plate_family_radii, synth_airfoil, synth_plate,
    synth_square_notch_plate, AirfoilParams, AirfoilRanges, PLATE_TAGS,
};

/// Interned tag identifier.
pub type TagId = usize;

/// A boundary edge oriented so that the domain lies to its left.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BoundaryEdge {
    pub v: [usize; 2],
    pub tag: TagId,
}

/// Validated planar triangulation.
///
/// Immutable after construction. Morphed configurations share the topology
/// and are represented by separate position arrays.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "io::MeshFile", into = "io::MeshFile")]
pub struct Mesh2D {
    vertices: Vec<Vec2>,
    triangles: Vec<[usize; 3]>,
    boundary_edges: Vec<BoundaryEdge>,
    tags: Vec<String>,
    tracked_points: BTreeMap<String, usize>,
    /// Closed loops as ordered boundary-edge indices.
    loops: Vec<Vec<usize>>,
    /// For every vertex, the boundary edges ending and starting at it.
    vertex_edges: Vec<[Option<usize>; 2]>,
}

impl Mesh2D {
    /// Builds and validates a mesh.
    ///
    /// Boundary edges may be given in either orientation; they are stored in
    /// the orientation of their owning triangle.
    pub fn new(
        vertices: Vec<Vec2>,
        triangles: Vec<[usize; 3]>,
        boundary_edges: Vec<(usize, usize, String)>,
        tracked_points: BTreeMap<String, usize>,
    ) -> Result<Self> {
        let nv = vertices.len();
        for (i, p) in vertices.iter().enumerate() {
            if !p.x.is_finite() || !p.y.is_finite() {
                return Err(Error::InvalidMesh(format!("non-finite coordinate at vertex {i}")));
            }
        }
        for (t, tri) in triangles.iter().enumerate() {
            for &v in tri {
                if v >= nv {
                    return Err(Error::InvalidMesh(format!(
                        "dangling vertex index {v} in triangle {t}"
                    )));
                }
            }
            if tri[0] == tri[1] || tri[1] == tri[2] || tri[0] == tri[2] {
                return Err(Error::InvalidMesh(format!("repeated vertex in triangle {t}")));
            }
            let a = orient2(vertices[tri[0]], vertices[tri[1]], vertices[tri[2]]);
            if a <= 0.0 {
                return Err(Error::InvalidMesh(format!("negative signed area at triangle {t}")));
            }
        }

        // Directed half-edges; an undirected edge seen once is on the boundary.
        let mut edge_count: HashMap<(usize, usize), (u32, (usize, usize))> = HashMap::new();
        for tri in &triangles {
            for k in 0..3 {
                let (a, b) = (tri[k], tri[(k + 1) % 3]);
                let e = edge_count.entry((a.min(b), a.max(b))).or_insert((0, (a, b)));
                e.0 += 1;
                if e.0 > 2 {
                    return Err(Error::InvalidMesh(format!("non-manifold edge ({a}, {b})")));
                }
            }
        }

        let mut tags: Vec<String> = Vec::new();
        let mut tag_ids: HashMap<String, TagId> = HashMap::new();
        let mut edges = Vec::with_capacity(boundary_edges.len());
        let mut tagged: HashMap<(usize, usize), usize> = HashMap::new();
        for (i, (a, b, tag)) in boundary_edges.into_iter().enumerate() {
            if a >= nv || b >= nv {
                return Err(Error::InvalidMesh(format!(
                    "dangling vertex index in boundary edge {i}"
                )));
            }
            let key = (a.min(b), a.max(b));
            let oriented = match edge_count.get(&key) {
                Some(&(1, dir)) => dir,
                _ => {
                    return Err(Error::InvalidMesh(format!(
                        "tagged edge {i} ({a}, {b}) is not a boundary edge"
                    )))
                }
            };
            if tagged.insert(key, i).is_some() {
                return Err(Error::InvalidMesh(format!("boundary edge {i} ({a}, {b}) tagged twice")));
            }
            let id = *tag_ids.entry(tag.clone()).or_insert_with(|| {
                tags.push(tag);
                tags.len() - 1
            });
            edges.push(BoundaryEdge { v: [oriented.0, oriented.1], tag: id });
        }
        let mut untagged: Vec<(usize, usize)> = edge_count
            .iter()
            .filter(|(k, c)| c.0 == 1 && !tagged.contains_key(k))
            .map(|(k, _)| *k)
            .collect();
        untagged.sort_unstable();
        if let Some(&(a, b)) = untagged.first() {
            return Err(Error::InvalidMesh(format!("untagged boundary edge ({a}, {b})")));
        }

        let mut vertex_edges = vec![[None, None]; nv];
        for (i, e) in edges.iter().enumerate() {
            for (slot, v) in [(1, e.v[0]), (0, e.v[1])] {
                if vertex_edges[v][slot].replace(i).is_some() {
                    return Err(Error::InvalidMesh(format!(
                        "boundary vertex {v} is shared by more than two boundary edges"
                    )));
                }
            }
        }

        for (name, &v) in &tracked_points {
            if v >= nv || vertex_edges[v][0].is_none() {
                return Err(Error::InvalidMesh(format!(
                    "tracked point \"{name}\" (vertex {v}) is not on the boundary"
                )));
            }
        }

        // Chain edges into loops, starting from the lowest unused edge.
        let mut used = vec![false; edges.len()];
        let mut loops = Vec::new();
        for start in 0..edges.len() {
            if used[start] {
                continue;
            }
            let mut lp = Vec::new();
            let mut e = start;
            loop {
                used[e] = true;
                lp.push(e);
                let next = vertex_edges[edges[e].v[1]][1]
                    .ok_or_else(|| Error::InvalidMesh(format!("boundary loop through edge {e} is not closed")))?;
                if next == start {
                    break;
                }
                if used[next] {
                    return Err(Error::InvalidMesh(format!("boundary loop through edge {e} is not closed")));
                }
                e = next;
            }
            loops.push(lp);
        }

        let mesh = Mesh2D {
            vertices,
            triangles,
            boundary_edges: edges,
            tags,
            tracked_points,
            loops,
            vertex_edges,
        };
        if let Some((i, j)) = mesh.boundary_self_intersection(&mesh.vertices) {
            return Err(Error::InvalidMesh(format!(
                "boundary edges {i} and {j} intersect"
            )));
        }
        Ok(mesh)
    }

    pub fn vertices(&self) -> &[Vec2] {
        &self.vertices
    }

    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn boundary_edges(&self) -> &[BoundaryEdge] {
        &self.boundary_edges
    }

    pub fn tags(&self) -> &[String] {
        &self.tags
    }

    pub fn tag_name(&self, id: TagId) -> &str {
        &self.tags[id]
    }

    pub fn tag_id(&self, name: &str) -> Result<TagId> {
        self.tags
            .iter()
            .position(|t| t == name)
            .ok_or_else(|| Error::UnknownTag(name.to_string()))
    }

    pub fn tracked_points(&self) -> &BTreeMap<String, usize> {
        &self.tracked_points
    }

    pub fn loops(&self) -> &[Vec<usize>] {
        &self.loops
    }

    /// Boundary edges `[incoming, outgoing]` at vertex `v` (both `None` for
    /// interior vertices).
    pub fn vertex_boundary_edges(&self, v: usize) -> [Option<usize>; 2] {
        self.vertex_edges[v]
    }

    pub fn is_boundary_vertex(&self, v: usize) -> bool {
        self.vertex_edges[v][0].is_some()
    }

    /// Sorted list of boundary vertex indices.
    pub fn boundary_vertices(&self) -> Vec<usize> {
        (0..self.n_vertices()).filter(|&v| self.is_boundary_vertex(v)).collect()
    }

    /// Signed areas of all triangles at the given positions.
    pub fn signed_areas(&self, x: &[Vec2]) -> Vec<f64> {
        self.triangles
            .iter()
            .map(|t| 0.5 * orient2(x[t[0]], x[t[1]], x[t[2]]))
            .collect()
    }

    /// Smallest signed triangle area and the triangle attaining it.
    pub fn min_signed_area(&self, x: &[Vec2]) -> (f64, usize) {
        let mut best = (f64::INFINITY, 0);
        for (i, t) in self.triangles.iter().enumerate() {
            let a = 0.5 * orient2(x[t[0]], x[t[1]], x[t[2]]);
            if a < best.0 {
                best = (a, i);
            }
        }
        best
    }

    /// Whether every triangle is strictly positively oriented at `x`.
    pub fn is_valid_configuration(&self, x: &[Vec2]) -> bool {
        self.min_signed_area(x).0 > 0.0
    }

    pub fn area(&self) -> f64 {
        self.signed_areas(&self.vertices).iter().sum()
    }

    /// Outward unit normal and length of boundary edge `e` at positions `x`.
    #[inline]
    pub fn edge_normal(&self, e: usize, x: &[Vec2]) -> (Vec2, f64) {
        let [a, b] = self.boundary_edges[e].v;
        let d = x[b] - x[a];
        let l = d.norm();
        (d.perp_cw() * (1.0 / l), l)
    }

    /// The boundary of the configuration `x` as a tagged polyline, including
    /// the tracked points.
    pub fn boundary_polyline(&self, x: &[Vec2]) -> BoundaryPolyline {
        let loops = self
            .loops
            .iter()
            .map(|lp| PolyLoop {
                points: lp.iter().map(|&e| x[self.boundary_edges[e].v[0]]).collect(),
                tags: lp.iter().map(|&e| self.boundary_edges[e].tag).collect(),
            })
            .collect();
        let points = self
            .tracked_points
            .iter()
            .map(|(k, &v)| (k.clone(), x[v]))
            .collect();
        BoundaryPolyline::from_parts(loops, self.tags.clone(), points)
            .expect("mesh boundary is a valid polyline")
    }

    /// A copy of this mesh with new vertex positions, fully re-validated.
    pub fn with_vertices(&self, x: Vec<Vec2>) -> Result<Mesh2D> {
        if x.len() != self.vertices.len() {
            return Err(Error::Dimension(format!(
                "{} positions for {} vertices",
                x.len(),
                self.vertices.len()
            )));
        }
        let edges = self
            .boundary_edges
            .iter()
            .map(|e| (e.v[0], e.v[1], self.tags[e.tag].clone()))
            .collect();
        Mesh2D::new(x, self.triangles.clone(), edges, self.tracked_points.clone())
    }

    /// First pair of non-adjacent boundary edges that intersect at `x`.
    pub fn boundary_self_intersection(&self, x: &[Vec2]) -> Option<(usize, usize)> {
        let edges = &self.boundary_edges;
        let n = edges.len();
        // Sort by min x of the bounding box and sweep.
        let mut order: Vec<usize> = (0..n).collect();
        let bbox = |e: usize| {
            let (a, b) = (x[edges[e].v[0]], x[edges[e].v[1]]);
            (a.x.min(b.x), a.x.max(b.x), a.y.min(b.y), a.y.max(b.y))
        };
        order.sort_by(|&i, &j| bbox(i).0.total_cmp(&bbox(j).0).then(i.cmp(&j)));
        let mut hits: Vec<(usize, usize)> = Vec::new();
        for (k, &i) in order.iter().enumerate() {
            let bi = bbox(i);
            for &j in &order[k + 1..] {
                let bj = bbox(j);
                if bj.0 > bi.1 {
                    break;
                }
                if bj.3 < bi.2 || bj.2 > bi.3 {
                    continue;
                }
                let (ei, ej) = (edges[i].v, edges[j].v);
                if ei[0] == ej[1] || ei[1] == ej[0] || ei[0] == ej[0] || ei[1] == ej[1] {
                    continue;
                }
                if segments_intersect(x[ei[0]], x[ei[1]], x[ej[0]], x[ej[1]]) {
                    hits.push((i.min(j), i.max(j)));
                }
            }
        }
        hits.into_iter().min()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tri_mesh(tri: [usize; 3]) -> Result<Mesh2D> {
        Mesh2D::new(
            vec![Vec2::new(0.0, 0.0), Vec2::new(1.0, 0.0), Vec2::new(0.0, 1.0)],
            vec![tri],
            vec![(0, 1, "a".into()), (1, 2, "b".into()), (2, 0, "a".into())],
            BTreeMap::from([("p".to_string(), 1)]),
        )
    }

    #[test]
    fn minimal_mesh_is_valid() {
        let m = tri_mesh([0, 1, 2]).unwrap();
        assert_eq!(m.triangles().len(), 1);
        assert_eq!(m.boundary_edges().len(), 3);
        assert_eq!(m.loops().len(), 1);
        assert_eq!(m.tags(), &["a".to_string(), "b".to_string()]);
    }

    #[test]
    fn clockwise_triangle_is_rejected() {
        let err = tri_mesh([0, 2, 1]).unwrap_err().to_string();
        assert!(err.contains("negative signed area at triangle 0"), "{err}");
    }

    #[test]
    fn reversed_edges_are_normalized() {
        let m = Mesh2D::new(
            vec![Vec2::new(0.0, 0.0), Vec2::new(1.0, 0.0), Vec2::new(0.0, 1.0)],
            vec![[0, 1, 2]],
            vec![(1, 0, "a".into()), (2, 1, "a".into()), (0, 2, "a".into())],
            BTreeMap::new(),
        )
        .unwrap();
        assert_eq!(m.boundary_edges()[0].v, [0, 1]);
        let (n, l) = m.edge_normal(0, m.vertices());
        assert_eq!(n, Vec2::new(0.0, -1.0));
        assert_eq!(l, 1.0);
    }

    #[test]
    fn missing_tag_and_dangling_index() {
        let v = vec![Vec2::new(0.0, 0.0), Vec2::new(1.0, 0.0), Vec2::new(0.0, 1.0)];
        let err = Mesh2D::new(
            v.clone(),
            vec![[0, 1, 2]],
            vec![(0, 1, "a".into()), (1, 2, "a".into())],
            BTreeMap::new(),
        )
        .unwrap_err()
        .to_string();
        assert!(err.contains("untagged boundary edge (0, 2)"), "{err}");
        let err = Mesh2D::new(v, vec![[0, 1, 5]], vec![], BTreeMap::new())
            .unwrap_err()
            .to_string();
        assert!(err.contains("dangling vertex index 5 in triangle 0"), "{err}");
    }

    #[test]
    fn interior_edge_cannot_be_tagged() {
        let v = vec![
            Vec2::new(0.0, 0.0),
            Vec2::new(1.0, 0.0),
            Vec2::new(1.0, 1.0),
            Vec2::new(0.0, 1.0),
        ];
        let err = Mesh2D::new(
            v,
            vec![[0, 1, 2], [0, 2, 3]],
            vec![
                (0, 1, "a".into()),
                (1, 2, "a".into()),
                (2, 3, "a".into()),
                (3, 0, "a".into()),
                (0, 2, "a".into()),
            ],
            BTreeMap::new(),
        )
        .unwrap_err()
        .to_string();
        assert!(err.contains("not a boundary edge"), "{err}");
    }

    #[test]
    fn tracked_point_must_be_on_boundary() {
        let mut v = vec![
            Vec2::new(0.0, 0.0),
            Vec2::new(2.0, 0.0),
            Vec2::new(2.0, 2.0),
            Vec2::new(0.0, 2.0),
        ];
        v.push(Vec2::new(1.0, 1.0));
        let tris = vec![[0, 1, 4], [1, 2, 4], [2, 3, 4], [3, 0, 4]];
        let edges = vec![
            (0, 1, "s".into()),
            (1, 2, "s".into()),
            (2, 3, "s".into()),
            (3, 0, "s".into()),
        ];
        let err = Mesh2D::new(v, tris, edges, BTreeMap::from([("c".to_string(), 4)]))
            .unwrap_err()
            .to_string();
        assert!(err.contains("not on the boundary"), "{err}");
    }
}
