//! Reduced morphing: explicit updates of the POD coordinates.

use faer::Mat;
use serde::{Deserialize, Serialize};

use crate::dense::symmetric_eigen;
use crate::distfield::VectorDistanceField;
use crate::error::{Error, Result};
use crate::fem::{assemble_rhs_lines, assemble_rhs_points, ElasticConfig, LineForm};
use crate::geom::Vec2;
use crate::mesh::Mesh2D;
use crate::morph::MorphTarget;

use super::PodBasis;

/// Step halvings tried when an update inverts an element.
const MAX_HALVINGS: usize = 5;

/// `Id + sum_j alpha_j zeta_j` on the reference vertices.
#[derive(Debug, Clone, PartialEq)]
pub struct ReducedMorphing {
    pub alpha: Vec<f64>,
    pub positions: Vec<Vec2>,
    /// All triangles positively oriented.
    pub valid: bool,
}

pub fn realize(reference: &Mesh2D, basis: &PodBasis, alpha: &[f64]) -> Result<ReducedMorphing> {
    if alpha.len() > basis.n_modes() {
        return Err(Error::Dimension(format!("{} coordinates for {} modes", alpha.len(), basis.n_modes())));
    }
    let u = basis.reconstruct(alpha);
    let positions: Vec<Vec2> = reference
        .vertices()
        .iter()
        .enumerate()
        .map(|(v, &p)| p + Vec2::new(u[2 * v], u[2 * v + 1]))
        .collect();
    let valid = reference.is_valid_configuration(&positions);
    Ok(ReducedMorphing { alpha: alpha.to_vec(), positions, valid })
}

/// `B_j = b^p(zeta_j) + b^l(zeta_j)` at the configuration `x`, with the
/// nodal mode values riding on the morphed boundary nodes.
pub fn reduced_functional(
    reference: &Mesh2D,
    basis: &PodBasis,
    x: &[Vec2],
    target: &MorphTarget,
    field: &VectorDistanceField,
    elastic: &ElasticConfig,
) -> Result<Vec<f64>> {
    let mut b = assemble_rhs_points(reference, x, target.points(), elastic.beta1)?;
    let l = assemble_rhs_lines(reference, x, field, elastic.beta2, elastic.line_form)?;
    b.iter_mut().zip(l).for_each(|(p, q)| *p += q);
    let nodes = reference.boundary_vertices();
    Ok((0..basis.n_modes())
        .map(|j| {
            let z = basis.mode(j);
            nodes.iter().map(|&v| z[2 * v] * b[2 * v] + z[2 * v + 1] * b[2 * v + 1]).sum()
        })
        .collect())
}

/// `alpha + gamma B(alpha)`.
pub fn online_iterate(
    reference: &Mesh2D,
    basis: &PodBasis,
    alpha: &[f64],
    target: &MorphTarget,
    elastic: &ElasticConfig,
    gamma: f64,
) -> Result<Vec<f64>> {
    let m = realize(reference, basis, alpha)?;
    if !m.valid {
        let (area, element) = reference.min_signed_area(&m.positions);
        return Err(Error::InvertedElement { element, area });
    }
    let field = target.field(reference, &m.positions)?;
    let b = reduced_functional(reference, basis, &m.positions, target, &field, elastic)?;
    Ok(alpha.iter().zip(&b).map(|(a, g)| a + gamma * g).collect())
}

/// `1 / lambda_max` of the linearized reduced load at the reference
/// configuration, a step size for which the explicit update is stable.
pub fn gamma_online(reference: &Mesh2D, basis: &PodBasis, elastic: &ElasticConfig) -> Result<f64> {
    let r = basis.n_modes();
    let x = reference.vertices();
    let mut h = Mat::<f64>::zeros(r, r);
    let modes: Vec<&[f64]> = (0..r).map(|j| basis.mode(j)).collect();
    let at = |j: usize, v: usize| Vec2::new(modes[j][2 * v], modes[j][2 * v + 1]);
    for (e, edge) in reference.boundary_edges().iter().enumerate() {
        let (n, len) = reference.edge_normal(e, x);
        let [a, b] = edge.v;
        let comp = |j: usize, v: usize| match elastic.line_form {
            LineForm::Normal => vec![at(j, v).dot(n)],
            LineForm::Full => vec![at(j, v).x, at(j, v).y],
        };
        for j in 0..r {
            for k in 0..r {
                let (ja, jb, ka, kb) = (comp(j, a), comp(j, b), comp(k, a), comp(k, b));
                let mut s = 0.0;
                for c in 0..ja.len() {
                    s += len / 6.0 * (2.0 * ja[c] * ka[c] + ja[c] * kb[c] + jb[c] * ka[c] + 2.0 * jb[c] * kb[c]);
                }
                h[(j, k)] += elastic.beta2 * s;
            }
        }
    }
    if elastic.beta1 != 0.0 {
        for &v in reference.tracked_points().values() {
            let support: f64 = reference
                .vertex_boundary_edges(v)
                .into_iter()
                .flatten()
                .map(|e| reference.edge_normal(e, x).1)
                .sum();
            for j in 0..r {
                for k in 0..r {
                    h[(j, k)] += elastic.beta1 * support * at(j, v).dot(at(k, v));
                }
            }
        }
    }
    let (values, _) = symmetric_eigen(&h)?;
    if !(values[0] > 0.0) {
        return Err(Error::Singular("reduced load has no positive curvature".into()));
    }
    Ok(1.0 / values[0])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OnlineStatus {
    Converged,
    MaxIterGradientLarge,
    OutOfDistribution,
}

impl OnlineStatus {
    pub fn exit_code(self) -> i32 {
        match self {
            OnlineStatus::Converged => 0,
            OnlineStatus::OutOfDistribution => 2,
            OnlineStatus::MaxIterGradientLarge => 3,
        }
    }

    pub fn recommendation(self) -> &'static str {
        match self {
            OnlineStatus::Converged => "none",
            OnlineStatus::MaxIterGradientLarge => "increase the iteration budget",
            OnlineStatus::OutOfDistribution => "increase r or fall back to full-order morphing",
        }
    }
}

/// Settings of [`online_solve`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OnlineSettings {
    pub delta_geo: f64,
    pub delta_grad: f64,
    pub max_iterations: usize,
    pub gamma: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OnlineRecord {
    pub iteration: usize,
    pub delta2: f64,
    pub gradient_norm: f64,
    /// Step size applied from this configuration; zero at the last one.
    pub gamma: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OnlineReport {
    pub initial_alpha: Vec<f64>,
    pub alpha: Vec<f64>,
    pub iterations: usize,
    pub initial_delta2: f64,
    pub delta2: f64,
    pub status: OnlineStatus,
    /// `|B(alpha)|` at exit.
    pub gradient_norm: f64,
    pub delta_grad: f64,
    pub recommendation: String,
    pub history: Vec<OnlineRecord>,
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum::<f64>().sqrt()
}

/// Explicit reduced iterations from `alpha0` until `Delta2 < delta_geo`,
/// classified at the iteration budget by the size of `B`. A stall where
/// every halved step inverts an element is out of distribution.
pub fn online_solve(
    reference: &Mesh2D,
    basis: &PodBasis,
    elastic: &ElasticConfig,
    target: &MorphTarget,
    alpha0: &[f64],
    settings: &OnlineSettings,
) -> Result<OnlineReport> {
    let mut alpha = alpha0.to_vec();
    let mut m = realize(reference, basis, &alpha)?;
    if !m.valid {
        log::warn!("initial coordinates give an inverted mesh; starting from the reference");
        alpha = vec![0.0; alpha0.len()];
        m = realize(reference, basis, &alpha)?;
    }
    let initial_alpha = alpha.clone();
    let mut history = Vec::new();
    let mut iteration = 0;
    loop {
        let field = target.field(reference, &m.positions)?;
        let delta2 = field.max_distance();
        let b = reduced_functional(reference, basis, &m.positions, target, &field, elastic)?;
        let eta = norm(&b);
        history.push(OnlineRecord { iteration, delta2, gradient_norm: eta, gamma: 0.0 });
        let mut status = None;
        if delta2 < settings.delta_geo {
            status = Some(OnlineStatus::Converged);
        } else if iteration >= settings.max_iterations {
            status = Some(if eta >= settings.delta_grad {
                OnlineStatus::MaxIterGradientLarge
            } else {
                OnlineStatus::OutOfDistribution
            });
        }
        let mut next = None;
        if status.is_none() {
            let mut gamma = settings.gamma;
            for _ in 0..=MAX_HALVINGS {
                let cand: Vec<f64> = alpha.iter().zip(&b).map(|(a, g)| a + gamma * g).collect();
                let mc = realize(reference, basis, &cand)?;
                if mc.valid {
                    next = Some((mc, gamma));
                    break;
                }
                gamma *= 0.5;
            }
            if next.is_none() {
                // Further iterations cannot move; the span does not reach the
                // target without inverting the mesh.
                log::warn!("iteration {iteration}: every step inverts an element");
                status = Some(OnlineStatus::OutOfDistribution);
            }
        }
        if let Some(status) = status {
            return Ok(OnlineReport {
                initial_alpha,
                alpha,
                iterations: iteration,
                initial_delta2: history[0].delta2,
                delta2,
                status,
                gradient_norm: eta,
                delta_grad: settings.delta_grad,
                recommendation: status.recommendation().into(),
                history,
            });
        }
        let (mc, gamma) = next.expect("step accepted");
        alpha = mc.alpha.clone();
        m = mc;
        iteration += 1;
        if let Some(r) = history.last_mut() {
            r.gamma = gamma;
        }
    }
}
