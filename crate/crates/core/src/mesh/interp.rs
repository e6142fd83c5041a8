use crate::error::{Error, Result};
use crate::geom::{closest_on_segment, orient2, Vec2};

use super::Mesh2D;

/// Displacement transferred to another mesh.
#[derive(Debug, Clone, PartialEq)]
pub struct Interpolation {
    pub displacement: Vec<Vec2>,
    /// Whether every triangle of the target mesh stays positively oriented
    /// after applying the displacement.
    pub positive: bool,
    /// Number of vertices evaluated by linear extension from outside.
    pub extrapolated: usize,
}

/// Barycentric coordinates of `p` in triangle `(a, b, c)`.
fn barycentric(p: Vec2, a: Vec2, b: Vec2, c: Vec2) -> [f64; 3] {
    let d = orient2(a, b, c);
    let l1 = orient2(p, b, c) / d;
    let l2 = orient2(a, p, c) / d;
    [l1, l2, 1.0 - l1 - l2]
}

/// Point location in a triangulation through a uniform bucket grid over
/// triangle bounding boxes.
#[derive(Debug, Clone)]
pub struct PointLocator {
    corners: Vec<[Vec2; 3]>,
    origin: Vec2,
    cell: f64,
    nx: usize,
    ny: usize,
    buckets: Vec<Vec<usize>>,
}

impl PointLocator {
    pub fn new(mesh: &Mesh2D) -> Self {
        Self::with_positions(mesh, mesh.vertices())
    }

    /// Locator for the configuration `x` of `mesh`.
    pub fn with_positions(mesh: &Mesh2D, x: &[Vec2]) -> Self {
        let (mut lo, mut hi) = (Vec2::new(f64::MAX, f64::MAX), Vec2::new(f64::MIN, f64::MIN));
        for p in x {
            lo = Vec2::new(lo.x.min(p.x), lo.y.min(p.y));
            hi = Vec2::new(hi.x.max(p.x), hi.y.max(p.y));
        }
        let n = (mesh.triangles().len() as f64).sqrt().ceil().max(1.0);
        let cell = ((hi.x - lo.x).max(hi.y - lo.y) / n).max(1e-300);
        let nx = ((hi.x - lo.x) / cell).floor() as usize + 1;
        let ny = ((hi.y - lo.y) / cell).floor() as usize + 1;
        let mut buckets = vec![Vec::new(); nx * ny];
        for (ti, t) in mesh.triangles().iter().enumerate() {
            let ps = [x[t[0]], x[t[1]], x[t[2]]];
            let bx0 = ps.iter().map(|p| p.x).fold(f64::MAX, f64::min);
            let bx1 = ps.iter().map(|p| p.x).fold(f64::MIN, f64::max);
            let by0 = ps.iter().map(|p| p.y).fold(f64::MAX, f64::min);
            let by1 = ps.iter().map(|p| p.y).fold(f64::MIN, f64::max);
            let (i0, i1) = (((bx0 - lo.x) / cell) as usize, ((bx1 - lo.x) / cell) as usize);
            let (j0, j1) = (((by0 - lo.y) / cell) as usize, ((by1 - lo.y) / cell) as usize);
            for j in j0..=j1.min(ny - 1) {
                for i in i0..=i1.min(nx - 1) {
                    buckets[j * nx + i].push(ti);
                }
            }
        }
        let corners = mesh.triangles().iter().map(|t| [x[t[0]], x[t[1]], x[t[2]]]).collect();
        PointLocator { corners, origin: lo, cell, nx, ny, buckets }
    }

    /// Triangle containing `p` (closed triangles; the best-centered one
    /// wins when several contain it) with barycentric coordinates.
    pub fn locate(&self, p: Vec2) -> Option<(usize, [f64; 3])> {
        let mut best: Option<(f64, usize, [f64; 3])> = None;
        for &ti in self.candidates(p) {
            let [a, b, c] = self.corners[ti];
            let l = barycentric(p, a, b, c);
            let m = l[0].min(l[1]).min(l[2]);
            if best.is_none_or(|b| m > b.0) {
                best = Some((m, ti, l));
            }
        }
        best.filter(|b| b.0 >= -1e-12).map(|b| (b.1, b.2))
    }

    fn candidates(&self, p: Vec2) -> &[usize] {
        let fx = (p.x - self.origin.x) / self.cell;
        let fy = (p.y - self.origin.y) / self.cell;
        if fx < 0.0 || fy < 0.0 || fx >= self.nx as f64 || fy >= self.ny as f64 {
            return &[];
        }
        &self.buckets[fy as usize * self.nx + fx as usize]
    }
}

/// Transfers a P1 displacement from `coarse` to the vertices of `fine`.
///
/// Vertices outside the coarse domain but within `tol` of it use the linear
/// extension of the nearest coarse triangle.
pub fn interpolate_morphing(
    coarse: &Mesh2D,
    coarse_displacement: &[Vec2],
    fine: &Mesh2D,
    tol: f64,
) -> Result<Interpolation> {
    if coarse_displacement.len() != coarse.n_vertices() {
        return Err(Error::Dimension(format!(
            "{} displacement values for {} coarse vertices",
            coarse_displacement.len(),
            coarse.n_vertices()
        )));
    }
    let x = coarse.vertices();
    let tris = coarse.triangles();
    let grid = PointLocator::new(coarse);
    let owners = boundary_owners(coarse);
    let eval = |ti: usize, l: [f64; 3]| {
        let t = tris[ti];
        coarse_displacement[t[0]] * l[0] + coarse_displacement[t[1]] * l[1] + coarse_displacement[t[2]] * l[2]
    };
    let mut out = Vec::with_capacity(fine.n_vertices());
    let mut extrapolated = 0;
    for (vi, &p) in fine.vertices().iter().enumerate() {
        match grid.locate(p) {
            Some((ti, l)) => out.push(eval(ti, l)),
            None => {
                // Nearest triangle by boundary distance.
                let mut near = (f64::INFINITY, 0usize);
                for (ei, e) in coarse.boundary_edges().iter().enumerate() {
                    let (_, d2) = closest_on_segment(p, x[e.v[0]], x[e.v[1]]);
                    if d2 < near.0 {
                        near = (d2, owners[ei]);
                    }
                }
                if near.0.sqrt() > tol {
                    return Err(Error::InvalidParameter(format!(
                        "fine vertex {vi} is {:.3e} away from the coarse domain (tolerance {tol:.3e})",
                        near.0.sqrt()
                    )));
                }
                let t = tris[near.1];
                extrapolated += 1;
                out.push(eval(near.1, barycentric(p, x[t[0]], x[t[1]], x[t[2]])));
            }
        }
    }
    let moved: Vec<Vec2> = fine.vertices().iter().zip(&out).map(|(&p, &u)| p + u).collect();
    let positive = fine.is_valid_configuration(&moved);
    Ok(Interpolation { displacement: out, positive, extrapolated })
}

/// Triangle owning each boundary edge.
fn boundary_owners(mesh: &Mesh2D) -> Vec<usize> {
    let mut by_edge = std::collections::HashMap::new();
    for (ti, t) in mesh.triangles().iter().enumerate() {
        for k in 0..3 {
            by_edge.insert((t[k], t[(k + 1) % 3]), ti);
        }
    }
    mesh.boundary_edges().iter().map(|e| by_edge[&(e.v[0], e.v[1])]).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::synth_plate;

    #[test]
    fn affine_fields_are_reproduced() {
        let coarse = synth_plate(0.5, 0.2).unwrap();
        let fine = synth_plate(0.5, 0.1).unwrap();
        let f = |p: Vec2| Vec2::new(0.3 * p.x - 0.1 * p.y + 0.2, 0.05 * p.x + 0.4 * p.y - 1.0);
        let u: Vec<Vec2> = coarse.vertices().iter().map(|&p| f(p)).collect();
        let r = interpolate_morphing(&coarse, &u, &fine, 0.05).unwrap();
        for (p, v) in fine.vertices().iter().zip(&r.displacement) {
            assert!((f(*p) - *v).norm() < 1e-12);
        }
        let zero = vec![Vec2::ZERO; coarse.n_vertices()];
        let r = interpolate_morphing(&coarse, &zero, &fine, 0.05).unwrap();
        assert!(r.positive && r.displacement.iter().all(|v| *v == Vec2::ZERO));
    }

    #[test]
    fn far_vertices_are_rejected() {
        let coarse = synth_plate(0.5, 0.2).unwrap();
        let fine = synth_plate(0.2, 0.2).unwrap();
        let zero = vec![Vec2::ZERO; coarse.n_vertices()];
        assert!(interpolate_morphing(&coarse, &zero, &fine, 1e-3).is_err());
    }
}
