use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::Vec2;

use super::Mesh2D;

/// Per-element shape regularity: cell diameter over shortest edge.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QualityReport {
    pub per_element: Vec<f64>,
    /// Maximum over the selected elements.
    pub max: f64,
    /// Element attaining `max`.
    pub argmax: usize,
}

/// Computes shape regularity at positions `x`, restricted to `mask` when
/// given.
pub fn shape_regularity(mesh: &Mesh2D, x: &[Vec2], mask: Option<&[bool]>) -> Result<QualityReport> {
    let per_element: Vec<f64> = mesh
        .triangles()
        .iter()
        .map(|t| {
            let l = [
                (x[t[1]] - x[t[0]]).norm(),
                (x[t[2]] - x[t[1]]).norm(),
                (x[t[0]] - x[t[2]]).norm(),
            ];
            l[0].max(l[1]).max(l[2]) / l[0].min(l[1]).min(l[2])
        })
        .collect();
    let mut best: Option<(f64, usize)> = None;
    for (i, &q) in per_element.iter().enumerate() {
        if mask.is_some_and(|m| !m[i]) {
            continue;
        }
        if best.is_none_or(|(b, _)| q > b) {
            best = Some((q, i));
        }
    }
    let (max, argmax) = best.ok_or_else(|| Error::InvalidParameter("empty quality mask".into()))?;
    Ok(QualityReport { per_element, max, argmax })
}

/// Mask of the triangles having at least one vertex on a line with tag
/// `tag`.
pub fn mask_touching_tag(mesh: &Mesh2D, tag: &str) -> Result<Vec<bool>> {
    let id = mesh.tag_id(tag)?;
    let mut on = vec![false; mesh.n_vertices()];
    for e in mesh.boundary_edges().iter().filter(|e| e.tag == id) {
        on[e.v[0]] = true;
        on[e.v[1]] = true;
    }
    Ok(mesh.triangles().iter().map(|t| t.iter().any(|&v| on[v])).collect())
}

#[cfg(test)]
mod tests {
    use std::collections::BTreeMap;

    use super::*;

    fn single(p: [Vec2; 3]) -> Mesh2D {
        Mesh2D::new(
            p.to_vec(),
            vec![[0, 1, 2]],
            vec![(0, 1, "a".into()), (1, 2, "a".into()), (2, 0, "a".into())],
            BTreeMap::new(),
        )
        .unwrap()
    }

    #[test]
    fn reference_triangles() {
        let eq = single([Vec2::new(0.0, 0.0), Vec2::new(1.0, 0.0), Vec2::new(0.5, 0.75f64.sqrt())]);
        assert!((shape_regularity(&eq, eq.vertices(), None).unwrap().max - 1.0).abs() < 1e-15);
        let ri = single([Vec2::new(0.0, 0.0), Vec2::new(1.0, 0.0), Vec2::new(0.0, 1.0)]);
        assert_eq!(shape_regularity(&ri, ri.vertices(), None).unwrap().max, 2f64.sqrt());
        let t345 = single([Vec2::new(0.0, 0.0), Vec2::new(3.0, 0.0), Vec2::new(0.0, 4.0)]);
        assert_eq!(shape_regularity(&t345, t345.vertices(), None).unwrap().max, 5.0 / 3.0);
    }

    #[test]
    fn empty_mask_is_an_error() {
        let m = single([Vec2::new(0.0, 0.0), Vec2::new(1.0, 0.0), Vec2::new(0.0, 1.0)]);
        assert!(shape_regularity(&m, m.vertices(), Some(&[false])).is_err());
    }
}
