//! P1 finite elements for the regularized elasticity problems.
//!
//! Displacements are stored interleaved: dof `2 v + c` is component `c` of
//! vertex `v`.

mod sparse;

use std::collections::BTreeMap;

use faer::sparse::Triplet;
use serde::{Deserialize, Serialize};

use crate::distfield::{BoundaryIndex, VectorDistanceField};
use crate::error::{Error, Result};
use crate::geom::{orient2, Vec2};
use crate::mesh::Mesh2D;

pub use sparse::{relative_residual, solve, solve_with_fixed, Factorization, Solver, SparseMatrix};

/// Form of the line-matching term.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LineForm {
    /// `beta2 * int (D.n)(v.n)`.
    #[default]
    Normal,
    /// `beta2 * int D.v`.
    Full,
}

/// Material and matching parameters of the morphing operator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ElasticConfig {
    /// Young modulus.
    pub young: f64,
    /// Poisson ratio.
    pub poisson: f64,
    /// Normal penalty weight on the boundary.
    pub alpha: f64,
    /// Point-matching weight.
    pub beta1: f64,
    /// Line-matching weight.
    pub beta2: f64,
    /// Reference element size for a per-element modulus `E h_ref / h_K`.
    #[serde(default)]
    pub variable_young: Option<f64>,
    #[serde(default)]
    pub line_form: LineForm,
}

impl ElasticConfig {
    /// Parameters used for the plate family.
    pub fn plate() -> Self {
        ElasticConfig {
            young: 1.0,
            poisson: 0.3,
            alpha: 200.0,
            beta1: 0.0,
            beta2: 1.0,
            variable_young: None,
            line_form: LineForm::Normal,
        }
    }

    /// Parameters used for the airfoil family.
    pub fn airfoil() -> Self {
        ElasticConfig {
            young: 0.1,
            poisson: 0.3,
            alpha: 500.0,
            beta1: 10.0,
            beta2: 1.0,
            variable_young: None,
            line_form: LineForm::Normal,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameter(m));
        if !(self.young > 0.0 && self.young.is_finite()) {
            return bad(format!("young modulus {} must be positive", self.young));
        }
        if !(self.poisson > -1.0 && self.poisson < 0.5) {
            return bad(format!("poisson ratio {} outside (-1, 0.5)", self.poisson));
        }
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return bad(format!("alpha {} must be positive", self.alpha));
        }
        if !(self.beta1 >= 0.0 && self.beta2 >= 0.0 && self.beta1.is_finite() && self.beta2.is_finite()) {
            return bad("beta1 and beta2 must be non-negative".into());
        }
        if let Some(h) = self.variable_young {
            if !(h > 0.0 && h.is_finite()) {
                return bad(format!("reference element size {h} must be positive"));
            }
        }
        Ok(())
    }

    /// Plane-stress matrix in Voigt notation (engineering shear strain).
    pub fn voigt(&self, young: f64) -> [[f64; 3]; 3] {
        let nu = self.poisson;
        let c = young / (1.0 - nu * nu);
        [[c, c * nu, 0.0], [c * nu, c, 0.0], [0.0, 0.0, young / (2.0 * (1.0 + nu))]]
    }
}

/// Two-point Gauss rule on `[0, 1]`: (parameter, weight).
pub const GAUSS2: [(f64, f64); 2] = [
    (0.211_324_865_405_187_1, 0.5),
    (0.788_675_134_594_812_9, 0.5),
];

/// Gradients of the barycentric functions and the signed area.
#[inline]
pub fn p1_gradients(p: [Vec2; 3]) -> ([Vec2; 3], f64) {
    let two_a = orient2(p[0], p[1], p[2]);
    let g = |j: usize, k: usize| Vec2::new(p[j].y - p[k].y, p[k].x - p[j].x) * (1.0 / two_a);
    ([g(1, 2), g(2, 0), g(0, 1)], 0.5 * two_a)
}

/// Symmetric 2x2 tensor `[[xx, xy], [xy, yy]]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sym2 {
    pub xx: f64,
    pub yy: f64,
    pub xy: f64,
}

/// Constant strain and stress of a P1 displacement on one triangle.
pub fn strain_stress(p: [Vec2; 3], u: [Vec2; 3], cfg: &ElasticConfig) -> Result<(Sym2, Sym2)> {
    let (g, area) = p1_gradients(p);
    if !(area.abs() > 0.0) || !area.is_finite() {
        return Err(Error::InvalidParameter("zero-area element".into()));
    }
    let (mut dux, mut duy) = (Vec2::ZERO, Vec2::ZERO);
    for k in 0..3 {
        dux += g[k] * u[k].x;
        duy += g[k] * u[k].y;
    }
    let eps = Sym2 { xx: dux.x, yy: duy.y, xy: 0.5 * (dux.y + duy.x) };
    let e = cfg.young;
    let nu = cfg.poisson;
    let a = e / (1.0 + nu);
    let b = e * nu / ((1.0 + nu) * (1.0 - nu));
    let tr = eps.xx + eps.yy;
    let sig = Sym2 { xx: a * eps.xx + b * tr, yy: a * eps.yy + b * tr, xy: a * eps.xy };
    Ok((eps, sig))
}

/// Element diameter.
fn diameter(p: [Vec2; 3]) -> f64 {
    (p[1] - p[0]).norm().max((p[2] - p[1]).norm()).max((p[0] - p[2]).norm())
}

fn element_young(cfg: &ElasticConfig, p: [Vec2; 3]) -> f64 {
    match cfg.variable_young {
        Some(h_ref) => cfg.young * h_ref / diameter(p),
        None => cfg.young,
    }
}

/// Adds the 6x6 stiffness of one triangle.
fn element_stiffness(p: [Vec2; 3], d: &[[f64; 3]; 3]) -> Result<[[f64; 6]; 6]> {
    let (g, area) = p1_gradients(p);
    if !(area > 0.0) {
        return Err(Error::InvalidParameter(format!("signed area {area:e}")));
    }
    // Strain-displacement rows for (eps_xx, eps_yy, gamma_xy).
    let mut b = [[0.0; 6]; 3];
    for k in 0..3 {
        b[0][2 * k] = g[k].x;
        b[1][2 * k + 1] = g[k].y;
        b[2][2 * k] = g[k].y;
        b[2][2 * k + 1] = g[k].x;
    }
    let mut db = [[0.0; 6]; 3];
    for i in 0..3 {
        for j in 0..6 {
            db[i][j] = (0..3).map(|k| d[i][k] * b[k][j]).sum();
        }
    }
    let mut k = [[0.0; 6]; 6];
    for i in 0..6 {
        for j in 0..6 {
            k[i][j] = area * (0..3).map(|m| b[m][i] * db[m][j]).sum::<f64>();
        }
    }
    Ok(k)
}

/// Which terms enter an assembled operator.
#[derive(Debug, Clone, Copy)]
struct Terms {
    penalty: bool,
}

fn assemble(mesh: &Mesh2D, x: &[Vec2], cfg: &ElasticConfig, terms: Terms) -> Result<SparseMatrix> {
    let n = 2 * mesh.n_vertices();
    let mut trip = Vec::with_capacity(36 * mesh.triangles().len() + 16 * mesh.boundary_edges().len());
    for (ti, t) in mesh.triangles().iter().enumerate() {
        let p = [x[t[0]], x[t[1]], x[t[2]]];
        let area = 0.5 * orient2(p[0], p[1], p[2]);
        if !(area > 0.0) {
            return Err(Error::InvertedElement { element: ti, area });
        }
        let d = cfg.voigt(element_young(cfg, p));
        let k = element_stiffness(p, &d)?;
        for a in 0..6 {
            for b in 0..6 {
                trip.push(Triplet::new(2 * t[a / 2] + a % 2, 2 * t[b / 2] + b % 2, k[a][b]));
            }
        }
    }
    if terms.penalty {
        for e in 0..mesh.boundary_edges().len() {
            let v = mesh.boundary_edges()[e].v;
            let (nrm, len) = mesh.edge_normal(e, x);
            let nn = [[nrm.x * nrm.x, nrm.x * nrm.y], [nrm.y * nrm.x, nrm.y * nrm.y]];
            for (a, &va) in v.iter().enumerate() {
                for (b, &vb) in v.iter().enumerate() {
                    // Exact edge mass: L/3 on the diagonal, L/6 off it.
                    let m = if a == b { len / 3.0 } else { len / 6.0 };
                    for ca in 0..2 {
                        for cb in 0..2 {
                            trip.push(Triplet::new(2 * va + ca, 2 * vb + cb, cfg.alpha * m * nn[ca][cb]));
                        }
                    }
                }
            }
        }
    }
    SparseMatrix::from_triplets(n, &trip)
}

/// Matrix of `a(u, v) = int sigma(u):eps(v) + alpha int (u.n)(v.n) ds` on the
/// configuration `x`.
pub fn assemble_operator(mesh: &Mesh2D, x: &[Vec2], cfg: &ElasticConfig) -> Result<SparseMatrix> {
    assemble(mesh, x, cfg, Terms { penalty: true })
}

/// Pure elasticity matrix (no boundary penalty).
pub fn assemble_stiffness(mesh: &Mesh2D, x: &[Vec2], cfg: &ElasticConfig) -> Result<SparseMatrix> {
    assemble(mesh, x, cfg, Terms { penalty: false })
}

/// Adds `w * phi_a(s) * f` to both endpoints of edge `v` for each Gauss point.
#[inline]
fn add_edge_load(rhs: &mut [f64], v: [usize; 2], len: f64, f: impl Fn(f64) -> Vec2) {
    for &(s, w) in &GAUSS2 {
        let val = f(s) * (w * len);
        let (a, b) = (val * (1.0 - s), val * s);
        rhs[2 * v[0]] += a.x;
        rhs[2 * v[0] + 1] += a.y;
        rhs[2 * v[1]] += b.x;
        rhs[2 * v[1] + 1] += b.y;
    }
}

/// `-int d_Omega (v.n) ds` with the signed distance of the target.
pub fn assemble_rhs_sdf(mesh: &Mesh2D, x: &[Vec2], index: &BoundaryIndex) -> Vec<f64> {
    let mut rhs = vec![0.0; 2 * mesh.n_vertices()];
    for (e, edge) in mesh.boundary_edges().iter().enumerate() {
        let (nrm, len) = mesh.edge_normal(e, x);
        let (a, b) = (x[edge.v[0]], x[edge.v[1]]);
        add_edge_load(&mut rhs, edge.v, len, |s| nrm * -index.signed_distance(a + (b - a) * s));
    }
    rhs
}

/// `beta1 * int_{N_k} (P_k - x_k).v ds` over the two boundary edges incident
/// to each tracked point with a target.
pub fn assemble_rhs_points(
    mesh: &Mesh2D,
    x: &[Vec2],
    targets: &BTreeMap<String, Vec2>,
    beta1: f64,
) -> Result<Vec<f64>> {
    let mut rhs = vec![0.0; 2 * mesh.n_vertices()];
    if beta1 == 0.0 {
        return Ok(rhs);
    }
    for (name, &v) in mesh.tracked_points() {
        let Some(&target) = targets.get(name) else {
            return Err(Error::TagMismatch(format!("target has no point \"{name}\"")));
        };
        let c = (target - x[v]) * beta1;
        let [ein, eout] = mesh.vertex_boundary_edges(v);
        for e in [ein, eout].into_iter().flatten() {
            let (_, len) = mesh.edge_normal(e, x);
            add_edge_load(&mut rhs, mesh.boundary_edges()[e].v, len, |_| c);
        }
    }
    Ok(rhs)
}

/// Line-matching load from vector distance samples, with `D` linear along
/// each edge.
pub fn assemble_rhs_lines(
    mesh: &Mesh2D,
    x: &[Vec2],
    field: &VectorDistanceField,
    beta2: f64,
    form: LineForm,
) -> Result<Vec<f64>> {
    let edges = mesh.boundary_edges();
    if field.edge_samples.len() != edges.len() {
        return Err(Error::Dimension(format!(
            "{} edge samples for {} boundary edges",
            field.edge_samples.len(),
            edges.len()
        )));
    }
    let mut rhs = vec![0.0; 2 * mesh.n_vertices()];
    for (e, edge) in edges.iter().enumerate() {
        let [s0, s1] = field.edge_samples[e];
        let (d0, d1) = (field.samples[s0].d, field.samples[s1].d);
        let (nrm, len) = mesh.edge_normal(e, x);
        match form {
            LineForm::Normal => add_edge_load(&mut rhs, edge.v, len, |s| {
                nrm * (beta2 * (d0 + (d1 - d0) * s).dot(nrm))
            }),
            LineForm::Full => add_edge_load(&mut rhs, edge.v, len, |s| (d0 + (d1 - d0) * s) * beta2),
        }
    }
    Ok(rhs)
}

/// Consistent P1 mass matrix (one scalar unknown per vertex).
pub fn assemble_mass(mesh: &Mesh2D) -> Result<SparseMatrix> {
    let x = mesh.vertices();
    let mut trip = Vec::with_capacity(9 * mesh.triangles().len());
    for t in mesh.triangles() {
        let a = 0.5 * orient2(x[t[0]], x[t[1]], x[t[2]]);
        for i in 0..3 {
            for j in 0..3 {
                let m = if i == j { a / 6.0 } else { a / 12.0 };
                trip.push(Triplet::new(t[i], t[j], m));
            }
        }
    }
    SparseMatrix::from_triplets(mesh.n_vertices(), &trip)
}

/// Consistent P1 mass matrix of the boundary trace (zero rows at interior
/// vertices are omitted from the pattern).
pub fn assemble_boundary_mass(mesh: &Mesh2D) -> Result<SparseMatrix> {
    let x = mesh.vertices();
    let mut trip = Vec::with_capacity(4 * mesh.boundary_edges().len());
    for (e, edge) in mesh.boundary_edges().iter().enumerate() {
        let (_, len) = mesh.edge_normal(e, x);
        for (a, &va) in edge.v.iter().enumerate() {
            for (b, &vb) in edge.v.iter().enumerate() {
                trip.push(Triplet::new(va, vb, if a == b { len / 3.0 } else { len / 6.0 }));
            }
        }
    }
    SparseMatrix::from_triplets(mesh.n_vertices(), &trip)
}

/// `sum_c u_c^T M w_c` for interleaved vector fields and a scalar mass matrix.
pub fn vector_inner(m: &SparseMatrix, u: &[f64], w: &[f64]) -> f64 {
    let mut s = 0.0;
    m.for_each(|i, j, v| s += v * (u[2 * i] * w[2 * j] + u[2 * i + 1] * w[2 * j + 1]));
    s
}

/// Flattens nodal vectors into interleaved dofs.
pub fn flatten(v: &[Vec2]) -> Vec<f64> {
    v.iter().flat_map(|p| [p.x, p.y]).collect()
}

/// Inverse of [`flatten`].
pub fn unflatten(u: &[f64]) -> Vec<Vec2> {
    u.chunks_exact(2).map(|c| Vec2::new(c[0], c[1])).collect()
}

/// Elastic extension of boundary displacements: solves `-div sigma(u) = 0`
/// with `u = boundary[v]` at every boundary vertex.
pub fn solve_dirichlet_correction(
    mesh: &Mesh2D,
    x: &[Vec2],
    boundary: &[Vec2],
    cfg: &ElasticConfig,
) -> Result<Vec<Vec2>> {
    if boundary.len() != mesh.n_vertices() {
        return Err(Error::Dimension(format!(
            "{} boundary values for {} vertices",
            boundary.len(),
            mesh.n_vertices()
        )));
    }
    let k = assemble_stiffness(mesh, x, cfg)?;
    let mut fixed = vec![None; 2 * mesh.n_vertices()];
    for v in mesh.boundary_vertices() {
        fixed[2 * v] = Some(boundary[v].x);
        fixed[2 * v + 1] = Some(boundary[v].y);
    }
    let zero = vec![0.0; 2 * mesh.n_vertices()];
    let u = solve_with_fixed(&mut Solver::new(), &k, &zero, &fixed)?;
    Ok(unflatten(&u))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tri() -> [Vec2; 3] {
        [Vec2::new(0.1, 0.0), Vec2::new(1.0, 0.2), Vec2::new(0.3, 0.9)]
    }

    #[test]
    fn rigid_motions_are_stress_free() {
        let cfg = ElasticConfig::plate();
        let p = tri();
        let (e, s) = strain_stress(p, [Vec2::new(0.3, -2.0); 3], &cfg).unwrap();
        assert!(e.xx.abs() + e.yy.abs() + e.xy.abs() + s.xx.abs() + s.xy.abs() < 1e-14);
        let rot = p.map(|q| Vec2::new(q.y, -q.x) * 0.01);
        let (e, _) = strain_stress(p, rot, &cfg).unwrap();
        assert!(e.xx.abs() + e.yy.abs() + e.xy.abs() < 1e-15);
    }

    #[test]
    fn uniaxial_without_poisson() {
        let cfg = ElasticConfig { poisson: 0.0, ..ElasticConfig::plate() };
        let p = tri();
        let (e, s) = strain_stress(p, p.map(|q| Vec2::new(q.x, 0.0)), &cfg).unwrap();
        assert!((e.xx - 1.0).abs() < 1e-14 && e.yy.abs() < 1e-14 && e.xy.abs() < 1e-14);
        assert!((s.xx - 1.0).abs() < 1e-14 && s.yy.abs() < 1e-14 && s.xy.abs() < 1e-14);
    }

    #[test]
    fn voigt_matches_tensor_form() {
        let cfg = ElasticConfig::plate();
        let p = tri();
        let u = [Vec2::new(0.1, 0.3), Vec2::new(-0.2, 0.05), Vec2::new(0.4, -0.1)];
        let (e, s) = strain_stress(p, u, &cfg).unwrap();
        let d = cfg.voigt(cfg.young);
        let v = [e.xx, e.yy, 2.0 * e.xy];
        let sv: Vec<f64> = (0..3).map(|i| (0..3).map(|k| d[i][k] * v[k]).sum()).collect();
        assert!((sv[0] - s.xx).abs() < 1e-14 && (sv[1] - s.yy).abs() < 1e-14 && (sv[2] - s.xy).abs() < 1e-14);
    }

    #[test]
    fn zero_area_is_an_error() {
        let p = [Vec2::ZERO, Vec2::new(1.0, 0.0), Vec2::new(2.0, 0.0)];
        assert!(strain_stress(p, [Vec2::ZERO; 3], &ElasticConfig::plate()).is_err());
    }
}
