use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::{polygon_area, Vec2};

use super::TagId;

/// One closed boundary loop. Segment `i` joins `points[i]` to
/// `points[(i + 1) % n]` and carries `tags[i]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PolyLoop {
    pub points: Vec<Vec2>,
    pub tags: Vec<TagId>,
}

impl PolyLoop {
    pub fn n_segments(&self) -> usize {
        self.points.len()
    }

    pub fn segment(&self, i: usize) -> (Vec2, Vec2) {
        (self.points[i], self.points[(i + 1) % self.points.len()])
    }
}

/// Tagged closed polylines describing a target boundary, plus named target
/// points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PolylineFile", into = "PolylineFile")]
pub struct BoundaryPolyline {
    loops: Vec<PolyLoop>,
    tags: Vec<String>,
    points: BTreeMap<String, Vec2>,
}

#[derive(Serialize, Deserialize, Clone)]
#[serde(deny_unknown_fields)]
struct LoopFile {
    points: Vec<Vec2>,
    tags: Vec<String>,
}

#[derive(Serialize, Deserialize, Clone)]
#[serde(deny_unknown_fields)]
struct PolylineFile {
    loops: Vec<LoopFile>,
    #[serde(default)]
    points: BTreeMap<String, Vec2>,
}

impl TryFrom<PolylineFile> for BoundaryPolyline {
    type Error = Error;

    fn try_from(f: PolylineFile) -> Result<Self> {
        let mut tags: Vec<String> = Vec::new();
        let mut loops = Vec::with_capacity(f.loops.len());
        for lp in f.loops {
            let ids = lp
                .tags
                .into_iter()
                .map(|t| match tags.iter().position(|x| *x == t) {
                    Some(i) => i,
                    None => {
                        tags.push(t);
                        tags.len() - 1
                    }
                })
                .collect();
            loops.push(PolyLoop { points: lp.points, tags: ids });
        }
        BoundaryPolyline::from_parts(loops, tags, f.points)
    }
}

impl From<BoundaryPolyline> for PolylineFile {
    fn from(p: BoundaryPolyline) -> Self {
        PolylineFile {
            loops: p
                .loops
                .iter()
                .map(|lp| LoopFile {
                    points: lp.points.clone(),
                    tags: lp.tags.iter().map(|&t| p.tags[t].clone()).collect(),
                })
                .collect(),
            points: p.points,
        }
    }
}

impl BoundaryPolyline {
    pub fn from_parts(
        loops: Vec<PolyLoop>,
        tags: Vec<String>,
        points: BTreeMap<String, Vec2>,
    ) -> Result<Self> {
        if loops.is_empty() {
            return Err(Error::InvalidPolyline("no loops".into()));
        }
        for (l, lp) in loops.iter().enumerate() {
            if lp.points.len() < 3 {
                return Err(Error::InvalidPolyline(format!("loop {l} has fewer than 3 points")));
            }
            if lp.tags.len() != lp.points.len() {
                return Err(Error::InvalidPolyline(format!(
                    "loop {l}: {} tags for {} segments",
                    lp.tags.len(),
                    lp.points.len()
                )));
            }
            for i in 0..lp.n_segments() {
                let (a, b) = lp.segment(i);
                if !(a.x.is_finite() && a.y.is_finite()) {
                    return Err(Error::InvalidPolyline(format!("loop {l}: non-finite point {i}")));
                }
                if a == b {
                    return Err(Error::InvalidPolyline(format!(
                        "loop {l}: consecutive points {i} coincide"
                    )));
                }
                if lp.tags[i] >= tags.len() {
                    return Err(Error::InvalidPolyline(format!("loop {l}: bad tag id on segment {i}")));
                }
            }
        }
        Ok(BoundaryPolyline { loops, tags, points })
    }

    pub fn loops(&self) -> &[PolyLoop] {
        &self.loops
    }

    pub fn tags(&self) -> &[String] {
        &self.tags
    }

    pub fn tag_id(&self, name: &str) -> Option<TagId> {
        self.tags.iter().position(|t| t == name)
    }

    pub fn points(&self) -> &BTreeMap<String, Vec2> {
        &self.points
    }

    pub fn n_segments(&self) -> usize {
        self.loops.iter().map(|l| l.n_segments()).sum()
    }

    /// Sum of signed loop areas.
    pub fn signed_area(&self) -> f64 {
        self.loops.iter().map(|l| polygon_area(&l.points)).sum()
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        super::read_json(path)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        super::write_json(path, self)
    }

    /// Applies `f` to every point (loops and named points).
    pub fn map_points(&self, f: impl Fn(Vec2) -> Vec2) -> Self {
        BoundaryPolyline {
            loops: self
                .loops
                .iter()
                .map(|l| PolyLoop {
                    points: l.points.iter().map(|&p| f(p)).collect(),
                    tags: l.tags.clone(),
                })
                .collect(),
            tags: self.tags.clone(),
            points: self.points.iter().map(|(k, &p)| (k.clone(), f(p))).collect(),
        }
    }
}
