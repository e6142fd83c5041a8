//! Snapshot POD in a mass-weighted inner product.

use std::fmt::Write as _;

use faer::Mat;
use serde::{Deserialize, Serialize};

use crate::codec::{vec_b64, Dense};
use crate::dense::symmetric_eigen;
use crate::error::{Error, Result};
use crate::fem::{vector_inner, SparseMatrix};

/// Relative cut-off below which eigenvalues carry no mode.
pub const EIGEN_CUTOFF: f64 = 1e-14;

/// Mass-orthonormal modes of a snapshot family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PodBasis {
    /// Eigenvalues of the correlation matrix, non-increasing and clamped at
    /// zero; one per snapshot.
    #[serde(with = "vec_b64")]
    pub eigenvalues: Vec<f64>,
    /// One mode per row, interleaved vector dofs.
    pub modes: Dense,
    /// Snapshot coordinates, one row per snapshot and one column per mode.
    pub coordinates: Dense,
}

/// `M u` for interleaved vector dofs and a scalar mass matrix.
pub fn mass_apply(m: &SparseMatrix, u: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; u.len()];
    m.for_each(|i, j, v| {
        out[2 * i] += v * u[2 * j];
        out[2 * i + 1] += v * u[2 * j + 1];
    });
    out
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(p, q)| p * q).sum()
}

/// POD of `snapshots` in the inner product `sum_c u_c^T M w_c`.
pub fn snapshot_pod(snapshots: &[Vec<f64>], mass: &SparseMatrix) -> Result<PodBasis> {
    let n = snapshots.len();
    let dofs = 2 * mass.n();
    if n == 0 {
        return Err(Error::InvalidParameter("no snapshots".into()));
    }
    if let Some(i) = snapshots.iter().position(|s| s.len() != dofs) {
        return Err(Error::Dimension(format!(
            "snapshot {i} has {} dofs, the mesh has {dofs}",
            snapshots[i].len()
        )));
    }
    let weighted: Vec<Vec<f64>> = snapshots.iter().map(|s| mass_apply(mass, s)).collect();
    let mut c = Mat::<f64>::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let v = 0.5 * (dot(&snapshots[i], &weighted[j]) + dot(&snapshots[j], &weighted[i]));
            c[(i, j)] = v;
            c[(j, i)] = v;
        }
    }
    let (mut values, vectors) = symmetric_eigen(&c)?;
    values.iter_mut().for_each(|v| *v = v.max(0.0));
    if values[0] <= 0.0 {
        return Err(Error::InvalidParameter("all snapshots are zero".into()));
    }
    let kept = values.iter().take_while(|&&v| v > values[0] * EIGEN_CUTOFF).count();
    let mut modes: Vec<Vec<f64>> = (0..kept)
        .map(|j| {
            let s = values[j].sqrt();
            let mut z = vec![0.0; dofs];
            for (i, psi) in snapshots.iter().enumerate() {
                let w = vectors[(i, j)] / s;
                z.iter_mut().zip(psi).for_each(|(a, b)| *a += w * b);
            }
            z
        })
        .collect();
    // Two passes of modified Gram-Schmidt against roundoff in the
    // correlation route.
    for _ in 0..2 {
        for j in 0..kept {
            for k in 0..j {
                let p = vector_inner(mass, &modes[j], &modes[k]);
                let (head, tail) = modes.split_at_mut(j);
                tail[0].iter_mut().zip(&head[k]).for_each(|(a, b)| *a -= p * b);
            }
            let nrm = vector_inner(mass, &modes[j], &modes[j]).sqrt();
            modes[j].iter_mut().for_each(|a| *a /= nrm);
        }
    }
    let weighted_modes: Vec<Vec<f64>> = modes.iter().map(|z| mass_apply(mass, z)).collect();
    let coordinates: Vec<Vec<f64>> =
        snapshots.iter().map(|s| weighted_modes.iter().map(|w| dot(s, w)).collect()).collect();
    Ok(PodBasis {
        eigenvalues: values,
        modes: Dense::from_rows(&modes),
        coordinates: Dense::from_rows(&coordinates),
    })
}

impl PodBasis {
    pub fn n_modes(&self) -> usize {
        self.modes.rows
    }

    pub fn mode(&self, j: usize) -> &[f64] {
        self.modes.row(j)
    }

    /// Keeps the first `r` modes.
    pub fn truncate(&self, r: usize) -> Result<PodBasis> {
        if r == 0 || r > self.n_modes() {
            return Err(Error::InvalidParameter(format!("cannot keep {r} of {} modes", self.n_modes())));
        }
        let rows = self.modes.to_rows();
        let coords: Vec<Vec<f64>> = self.coordinates.to_rows().into_iter().map(|c| c[..r].to_vec()).collect();
        Ok(PodBasis {
            eigenvalues: self.eigenvalues.clone(),
            modes: Dense::from_rows(&rows[..r]),
            coordinates: Dense::from_rows(&coords),
        })
    }

    /// Coordinates `<psi, zeta_j>_M` on all modes.
    pub fn project(&self, mass: &SparseMatrix, psi: &[f64]) -> Vec<f64> {
        (0..self.n_modes()).map(|j| vector_inner(mass, psi, self.mode(j))).collect()
    }

    /// `sum_j alpha_j zeta_j` over the first `alpha.len()` modes.
    pub fn reconstruct(&self, alpha: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.modes.cols];
        for (j, &a) in alpha.iter().enumerate() {
            out.iter_mut().zip(self.mode(j)).for_each(|(o, z)| *o += a * z);
        }
        out
    }

    /// `sum_i |psi_i - Pi_r psi_i|_M^2`, computed from the residuals.
    pub fn truncation_error(&self, snapshots: &[Vec<f64>], mass: &SparseMatrix, r: usize) -> f64 {
        snapshots
            .iter()
            .map(|s| {
                let a: Vec<f64> = (0..r).map(|j| vector_inner(mass, s, self.mode(j))).collect();
                let rec = self.reconstruct(&a);
                let res: Vec<f64> = s.iter().zip(&rec).map(|(p, q)| p - q).collect();
                vector_inner(mass, &res, &res)
            })
            .sum()
    }

    /// Smallest `r` whose discarded energy fraction is at most `delta`;
    /// the total is taken over the modes with a nonzero eigenvalue.
    pub fn energy_r(&self, delta: f64) -> usize {
        let kept = &self.eigenvalues[..self.n_modes()];
        let total: f64 = kept.iter().sum();
        let mut acc = 0.0;
        for (j, v) in kept.iter().enumerate() {
            acc += v;
            if 1.0 - acc / total <= delta {
                return j + 1;
            }
        }
        kept.len()
    }

    /// `index,eigenvalue,relative` rows, `relative = lambda_j / lambda_1`.
    pub fn eigenvalue_csv(&self) -> String {
        let mut s = String::from("index,eigenvalue,relative\n");
        for (j, v) in self.eigenvalues.iter().enumerate() {
            let _ = writeln!(s, "{},{v:.16e},{:.16e}", j + 1, v / self.eigenvalues[0]);
        }
        s
    }
}
