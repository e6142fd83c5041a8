//! Reduced-order morphing: POD of high-fidelity displacements, mode count
//! selection and the online iteration on POD coordinates.

mod offline;
mod online;
mod pod;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mesh::Mesh2D;
use crate::morph::MorphTarget;

pub use offline::{
    offline_workflow, OfflineConfig, OfflineOutput, OfflineTimings, ReducedModel, MODEL_VERSION,
};
pub use online::{
    gamma_online, online_iterate, online_solve, realize, reduced_functional, OnlineRecord,
    OnlineReport, OnlineSettings, OnlineStatus, ReducedMorphing,
};
pub use pod::{mass_apply, snapshot_pod, PodBasis, EIGEN_CUTOFF};

/// Rule for the number of kept modes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case", deny_unknown_fields)]
pub enum RSelection {
    /// Discarded energy fraction at most `delta_pod`.
    Energy { delta_pod: f64 },
    /// `max_i Delta2(phi_r(alpha^i)) < delta_geo` over the training targets.
    Geometric { delta_geo: f64 },
    Fixed { r: usize },
}

impl Default for RSelection {
    fn default() -> Self {
        RSelection::Geometric { delta_geo: 5e-4 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Selection {
    pub r: usize,
    /// `max_i Delta2(phi_r(alpha^i))` for `r = 1..=n_modes`; empty without
    /// targets.
    pub geometric_errors: Vec<f64>,
}

/// Picks the smallest `r` that meets the criterion and keeps every
/// reconstructed training morphing free of inverted elements.
pub fn select_r(
    reference: &Mesh2D,
    basis: &PodBasis,
    rule: RSelection,
    targets: &[MorphTarget],
) -> Result<Selection> {
    let n = basis.n_modes();
    let rows = basis.coordinates.to_rows();
    let valid = |r: usize| -> Result<bool> {
        for c in &rows {
            if !realize(reference, basis, &c[..r])?.valid {
                return Ok(false);
            }
        }
        Ok(true)
    };
    let mut geometric_errors = Vec::new();
    if !targets.is_empty() {
        if targets.len() != rows.len() {
            return Err(Error::Dimension(format!("{} targets for {} snapshots", targets.len(), rows.len())));
        }
        for r in 1..=n {
            let mut worst: f64 = 0.0;
            for (c, t) in rows.iter().zip(targets) {
                let m = realize(reference, basis, &c[..r])?;
                worst = worst.max(t.field(reference, &m.positions)?.max_distance());
            }
            geometric_errors.push(worst);
        }
    }
    let start = match rule {
        RSelection::Fixed { r } => {
            if r == 0 || r > n {
                return Err(Error::NoAdmissibleR(format!("fixed r = {r} with {n} modes")));
            }
            return Ok(Selection { r, geometric_errors });
        }
        RSelection::Energy { delta_pod } => basis.energy_r(delta_pod),
        RSelection::Geometric { delta_geo } => {
            if geometric_errors.is_empty() {
                return Err(Error::InvalidParameter("geometric criterion needs the training targets".into()));
            }
            match geometric_errors.iter().position(|&e| e < delta_geo) {
                Some(i) => i + 1,
                None => {
                    return Err(Error::NoAdmissibleR(format!(
                        "best geometric error {:e} is not below {delta_geo:e}",
                        geometric_errors.iter().fold(f64::INFINITY, |a, &b| a.min(b))
                    )))
                }
            }
        }
    };
    for r in start..=n {
        let meets = match rule {
            RSelection::Geometric { delta_geo } => geometric_errors[r - 1] < delta_geo,
            _ => true,
        };
        if meets && valid(r)? {
            return Ok(Selection { r, geometric_errors });
        }
    }
    Err(Error::NoAdmissibleR("every candidate inverts a training morphing".into()))
}
