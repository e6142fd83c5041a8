//! The level-set functional `J_g(phi) = int_{phi(Omega_0)} g` and its shape
//! derivative `DJ_g(phi)[v] = int_{phi(dOmega_0)} g (v.n) ds`.

use crate::distfield::BoundaryIndex;
use crate::fem::GAUSS2;
use crate::geom::{orient2, Vec2};
use crate::mesh::Mesh2D;

/// Degree-2 triangle rule: barycentric points with weight 1/3 each.
const TRI3: [[f64; 3]; 3] = [
    [2.0 / 3.0, 1.0 / 6.0, 1.0 / 6.0],
    [1.0 / 6.0, 2.0 / 3.0, 1.0 / 6.0],
    [1.0 / 6.0, 1.0 / 6.0, 2.0 / 3.0],
];

/// Integral of `g` over one triangle with the 3-point rule applied on each
/// of the `4^levels` sub-triangles of a uniform refinement.
fn triangle_integral(index: &BoundaryIndex, p: [Vec2; 3], levels: u32) -> f64 {
    let n = 1usize << levels;
    let e1 = (p[1] - p[0]) * (1.0 / n as f64);
    let e2 = (p[2] - p[0]) * (1.0 / n as f64);
    let at = |i: usize, j: usize| p[0] + e1 * i as f64 + e2 * j as f64;
    let sub_area = 0.5 * orient2(p[0], p[1], p[2]) / (n * n) as f64;
    let rule = |a: Vec2, b: Vec2, c: Vec2| -> f64 {
        TRI3.iter()
            .map(|l| index.signed_distance(a * l[0] + b * l[1] + c * l[2]))
            .sum::<f64>()
            / 3.0
    };
    let mut s = 0.0;
    for j in 0..n {
        for i in 0..n - j {
            s += rule(at(i, j), at(i + 1, j), at(i, j + 1));
            if i + j + 2 <= n {
                s += rule(at(i + 1, j), at(i + 1, j + 1), at(i, j + 1));
            }
        }
    }
    s * sub_area
}

/// `J_g` on configuration `x`, with `g` the target signed distance.
pub fn evaluate_jg(mesh: &Mesh2D, x: &[Vec2], index: &BoundaryIndex, levels: u32) -> f64 {
    mesh.triangles()
        .iter()
        .map(|t| triangle_integral(index, [x[t[0]], x[t[1]], x[t[2]]], levels))
        .sum()
}

/// `int g (v.n) ds` over the boundary of configuration `x`, with composite
/// two-point Gauss on `2^levels` pieces per edge. `v` is nodal and linear
/// along edges.
pub fn shape_derivative(mesh: &Mesh2D, x: &[Vec2], index: &BoundaryIndex, v: &[Vec2], levels: u32) -> f64 {
    let pieces = 1usize << levels;
    let mut s = 0.0;
    for (e, edge) in mesh.boundary_edges().iter().enumerate() {
        let (nrm, len) = mesh.edge_normal(e, x);
        let (a, b) = (x[edge.v[0]], x[edge.v[1]]);
        let (va, vb) = (v[edge.v[0]].dot(nrm), v[edge.v[1]].dot(nrm));
        for k in 0..pieces {
            for &(q, w) in &GAUSS2 {
                let t = (k as f64 + q) / pieces as f64;
                let g = index.signed_distance(a + (b - a) * t);
                s += w * len / pieces as f64 * g * (va + (vb - va) * t);
            }
        }
    }
    s
}

/// Analytic and finite-difference directional derivatives of `J_g`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradientCheck {
    pub analytic: f64,
    pub numeric: f64,
    pub step: f64,
}

impl GradientCheck {
    pub fn relative_error(&self) -> f64 {
        (self.analytic - self.numeric).abs() / self.analytic.abs().max(1e-12)
    }
}

/// Compares [`shape_derivative`] with the central difference
/// `(J(x + t v) - J(x - t v)) / 2t`, `t = 1e-5 * diam`.
///
/// Only triangles touching the support of `v` change, so the difference is
/// accumulated per triangle to avoid cancellation.
pub fn gradient_check(mesh: &Mesh2D, x: &[Vec2], index: &BoundaryIndex, v: &[Vec2], levels: u32) -> GradientCheck {
    let (mut lo, mut hi) = (Vec2::new(f64::MAX, f64::MAX), Vec2::new(f64::MIN, f64::MIN));
    for p in x {
        lo = Vec2::new(lo.x.min(p.x), lo.y.min(p.y));
        hi = Vec2::new(hi.x.max(p.x), hi.y.max(p.y));
    }
    let t = 1e-5 * (hi - lo).norm();
    let mut diff = 0.0;
    for tri in mesh.triangles() {
        if tri.iter().all(|&k| v[k] == Vec2::ZERO) {
            continue;
        }
        let shifted = |s: f64| tri.map(|k| x[k] + v[k] * s);
        diff += triangle_integral(index, shifted(t), levels) - triangle_integral(index, shifted(-t), levels);
    }
    GradientCheck {
        analytic: shape_derivative(mesh, x, index, v, levels),
        numeric: diff / (2.0 * t),
        step: t,
    }
}
