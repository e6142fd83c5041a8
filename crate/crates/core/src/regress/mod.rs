//! Regression on geometric coordinates: GP models, shape features and
//! scoring.

mod features;
mod gpr;
mod lbfgs;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::{polygon_area, Vec2};
use crate::mesh::BoundaryPolyline;

pub use features::{fit_feature_basis, shape_features, FeatureBasis};
pub use gpr::{matern52, GpOutput, GprConfig, GprModel, Prediction};
pub use lbfgs::{minimize, LbfgsOptions, Minimum};

/// Coefficient of determination `1 - sum (y - f)^2 / sum (y - mean y)^2`.
pub fn q2_score(y_true: &[f64], y_pred: &[f64]) -> Result<f64> {
    if y_true.len() != y_pred.len() {
        return Err(Error::Dimension(format!("{} truths for {} predictions", y_true.len(), y_pred.len())));
    }
    if y_true.len() < 2 {
        return Err(Error::InvalidParameter("Q2 needs at least two samples".into()));
    }
    let mean = y_true.iter().sum::<f64>() / y_true.len() as f64;
    let ss_tot: f64 = y_true.iter().map(|y| (y - mean) * (y - mean)).sum();
    if ss_tot == 0.0 {
        return Err(Error::InvalidParameter("Q2 undefined for constant truth".into()));
    }
    let ss_res: f64 = y_true.iter().zip(y_pred).map(|(y, f)| (y - f) * (y - f)).sum();
    Ok(1.0 - ss_res / ss_tot)
}

/// Drag-like functional `v0^2 * int max(0, n.e(theta0)) ds` over the shape
/// loop, the loop of smallest enclosed area. `n` is the normal pointing
/// out of the enclosed shape.
pub fn synthetic_scalar_oracle(boundary: &BoundaryPolyline, v0: f64, theta0: f64) -> Result<f64> {
    let shape = boundary
        .loops()
        .iter()
        .min_by(|a, b| polygon_area(&a.points).abs().total_cmp(&polygon_area(&b.points).abs()))
        .ok_or_else(|| Error::InvalidPolyline("no loops".into()))?;
    if shape.points.len() < 3 {
        return Err(Error::InvalidPolyline("shape loop is not closed".into()));
    }
    let sign = polygon_area(&shape.points).signum();
    let e = Vec2::new(theta0.cos(), theta0.sin());
    let mut w = 0.0;
    for i in 0..shape.n_segments() {
        let (a, b) = shape.segment(i);
        // The unnormalized outward normal has the segment length as norm.
        w += (sign * (b - a).perp_cw().dot(e)).max(0.0);
    }
    Ok(v0 * v0 * w)
}

/// One labelled sample for scalar learning.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScalarSample {
    pub id: String,
    /// Morphing coordinates.
    pub alpha: Vec<f64>,
    /// Physical parameters.
    pub mu: Vec<f64>,
    pub outputs: Vec<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScalarDataset {
    pub samples: Vec<ScalarSample>,
}

impl ScalarDataset {
    /// Checks that all samples share their dimensions; returns
    /// `(alpha, mu, outputs)` lengths.
    pub fn dimensions(&self) -> Result<(usize, usize, usize)> {
        let first = self.samples.first().ok_or_else(|| Error::InvalidParameter("empty dataset".into()))?;
        let dims = (first.alpha.len(), first.mu.len(), first.outputs.len());
        for s in &self.samples {
            if (s.alpha.len(), s.mu.len(), s.outputs.len()) != dims {
                return Err(Error::Dimension(format!(
                    "sample {} has dimensions ({}, {}, {}), expected {dims:?}",
                    s.id,
                    s.alpha.len(),
                    s.mu.len(),
                    s.outputs.len()
                )));
            }
        }
        Ok(dims)
    }
}

/// GP from concatenated `(alpha, mu)` to scalar outputs.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScalarModel {
    pub n_alpha: usize,
    pub n_mu: usize,
    pub gpr: GprModel,
}

impl ScalarModel {
    pub fn train(data: &ScalarDataset, cfg: &GprConfig) -> Result<Self> {
        let (n_alpha, n_mu, _) = data.dimensions()?;
        let x: Vec<Vec<f64>> = data.samples.iter().map(|s| [&s.alpha[..], &s.mu[..]].concat()).collect();
        let y: Vec<Vec<f64>> = data.samples.iter().map(|s| s.outputs.clone()).collect();
        Ok(ScalarModel { n_alpha, n_mu, gpr: GprModel::train(&x, &y, cfg)? })
    }

    pub fn predict(&self, alpha: &[f64], mu: &[f64]) -> Result<Prediction> {
        if alpha.len() != self.n_alpha || mu.len() != self.n_mu {
            return Err(Error::Dimension(format!(
                "query ({}, {}) for a model over ({}, {})",
                alpha.len(),
                mu.len(),
                self.n_alpha,
                self.n_mu
            )));
        }
        self.gpr.predict(&[alpha, mu].concat())
    }
}
