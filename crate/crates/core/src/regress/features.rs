//! Geometry features: vector distance from the reference boundary to a
//! target, reduced by a boundary POD.

use serde::{Deserialize, Serialize};

use crate::codec::{vec_b64, Dense};
use crate::distfield::nodal_boundary_displacement;
use crate::error::{Error, Result};
use crate::fem::{assemble_boundary_mass, SparseMatrix};
use crate::mesh::Mesh2D;
use crate::morph::MorphTarget;
use crate::rom::{mass_apply, snapshot_pod};

/// Boundary POD basis for feature fields.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureBasis {
    /// Reference boundary vertices, ascending; field entry `2k + c` is
    /// component `c` at `boundary_nodes[k]`.
    pub boundary_nodes: Vec<usize>,
    /// Boundary-mass-orthonormal modes, one per row.
    pub modes: Dense,
    /// `M theta_j`, so that coordinates are plain dot products.
    pub weights: Dense,
    #[serde(with = "vec_b64")]
    pub eigenvalues: Vec<f64>,
}

/// Nodal displacement taking each reference boundary node onto the target,
/// stacked `(x, y)` per boundary node.
pub fn shape_features(reference: &Mesh2D, target: &MorphTarget) -> Result<Vec<f64>> {
    let x = reference.vertices();
    let field = target.field(reference, x)?;
    let d = nodal_boundary_displacement(reference, x, &target.index, &target.tags, &field);
    Ok(reference.boundary_vertices().into_iter().flat_map(|v| [d[v].x, d[v].y]).collect())
}

fn boundary_mass(reference: &Mesh2D, nodes: &[usize]) -> Result<SparseMatrix> {
    let mut keep = vec![None; reference.n_vertices()];
    for (k, &v) in nodes.iter().enumerate() {
        keep[v] = Some(k);
    }
    assemble_boundary_mass(reference)?.restrict(&keep, nodes.len())
}

/// POD of the feature fields with at most `q` modes; returns the basis and
/// the coordinates of every field.
pub fn fit_feature_basis(
    reference: &Mesh2D,
    fields: &[Vec<f64>],
    q: usize,
) -> Result<(FeatureBasis, Vec<Vec<f64>>)> {
    if q == 0 {
        return Err(Error::InvalidParameter("q must be positive".into()));
    }
    let nodes = reference.boundary_vertices();
    let mass = boundary_mass(reference, &nodes)?;
    let pod = snapshot_pod(fields, &mass)?;
    let pod = pod.truncate(q.min(pod.n_modes()))?;
    let weights: Vec<Vec<f64>> = (0..pod.n_modes()).map(|j| mass_apply(&mass, pod.mode(j))).collect();
    let basis = FeatureBasis {
        boundary_nodes: nodes,
        modes: pod.modes.clone(),
        weights: Dense::from_rows(&weights),
        eigenvalues: pod.eigenvalues.clone(),
    };
    let coords = fields.iter().map(|f| basis.coordinates(f)).collect::<Result<Vec<_>>>()?;
    Ok((basis, coords))
}

impl FeatureBasis {
    pub fn q(&self) -> usize {
        self.modes.rows
    }

    pub fn coordinates(&self, field: &[f64]) -> Result<Vec<f64>> {
        if field.len() != self.weights.cols {
            return Err(Error::Dimension(format!(
                "feature field of length {} for {} boundary dofs",
                field.len(),
                self.weights.cols
            )));
        }
        Ok((0..self.q())
            .map(|j| self.weights.row(j).iter().zip(field).map(|(a, b)| a * b).sum())
            .collect())
    }

    /// Fraction of the feature energy captured by the kept modes.
    pub fn captured_energy(&self) -> f64 {
        let total: f64 = self.eigenvalues.iter().sum();
        self.eigenvalues[..self.q()].iter().sum::<f64>() / total
    }
}
