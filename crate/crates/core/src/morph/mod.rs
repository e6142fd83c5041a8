//! Iterative elasticity-based morphing onto a target boundary.
//!
//! Each iteration solves `a(u, v) = b(v)` on the current morphed mesh and
//! moves every vertex by `gamma * u`. The load `b` is either the signed
//! distance term (`Sdf`) or the point and line matching terms built from
//! the vector distance (`Vdf`).

mod shape;

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::distfield::{
    delta1, delta2, nodal_boundary_displacement, vector_distance_field, BoundaryIndex, Sampling,
    TagMap, VectorDistanceField,
};
use crate::error::{Error, Result};
use crate::fem::{
    assemble_operator, assemble_rhs_lines, assemble_rhs_points, assemble_rhs_sdf,
    solve_dirichlet_correction, solve_with_fixed, unflatten, ElasticConfig, Solver,
};
use crate::geom::Vec2;
use crate::mesh::{shape_regularity, BoundaryPolyline, Mesh2D};

pub use shape::{evaluate_jg, gradient_check, shape_derivative, GradientCheck};

/// Load used to drive the morphing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    Sdf,
    Vdf,
}

fn default_window() -> usize {
    20
}

fn default_rejections() -> usize {
    5
}

/// Parameters of one high-fidelity morphing run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MorphConfig {
    pub elastic: ElasticConfig,
    /// Step size.
    pub gamma: f64,
    /// Convergence tolerance on the stopping metric.
    pub epsilon: f64,
    pub max_iterations: usize,
    pub algorithm: Algorithm,
    #[serde(default)]
    pub sampling: Sampling,
    /// Boundary lines held fixed (zero displacement).
    #[serde(default)]
    pub fixed_tags: Vec<String>,
    /// Abort after this many consecutive increases of the stopping metric.
    #[serde(default = "default_window")]
    pub divergence_window: usize,
    /// Step halvings allowed before a step is declared failed.
    #[serde(default = "default_rejections")]
    pub max_rejections: usize,
}

impl MorphConfig {
    /// Plate family settings (vector distance algorithm).
    pub fn plate() -> Self {
        MorphConfig {
            elastic: ElasticConfig::plate(),
            gamma: 8.0,
            epsilon: 1e-3,
            max_iterations: 500,
            algorithm: Algorithm::Vdf,
            sampling: Sampling::NodesOnly,
            fixed_tags: Vec::new(),
            divergence_window: default_window(),
            max_rejections: default_rejections(),
        }
    }

    /// Airfoil family settings; the far field does not move.
    pub fn airfoil() -> Self {
        MorphConfig {
            elastic: ElasticConfig::airfoil(),
            gamma: 5.0,
            epsilon: 5e-4,
            max_iterations: 1000,
            algorithm: Algorithm::Vdf,
            sampling: Sampling::NodesOnly,
            fixed_tags: vec!["farfield".to_string()],
            divergence_window: default_window(),
            max_rejections: default_rejections(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.elastic.validate()?;
        if !(self.gamma >= 0.0 && self.gamma.is_finite()) {
            return Err(Error::InvalidParameter(format!("gamma {} must be non-negative", self.gamma)));
        }
        if !(self.epsilon > 0.0) {
            return Err(Error::InvalidParameter(format!("epsilon {} must be positive", self.epsilon)));
        }
        if self.divergence_window == 0 {
            return Err(Error::InvalidParameter("divergence window must be positive".into()));
        }
        Ok(())
    }
}

/// Target boundary prepared for a given reference mesh.
pub struct MorphTarget {
    pub index: BoundaryIndex,
    pub tags: TagMap,
}

impl MorphTarget {
    pub fn new(reference: &Mesh2D, target: &BoundaryPolyline) -> Result<Self> {
        let index = BoundaryIndex::build(target)?;
        let tags = TagMap::new(reference, &index)?;
        Ok(MorphTarget { index, tags })
    }

    pub fn points(&self) -> &BTreeMap<String, Vec2> {
        self.index.polyline().points()
    }

    pub fn field(&self, mesh: &Mesh2D, x: &[Vec2]) -> Result<VectorDistanceField> {
        vector_distance_field(mesh, x, &self.index, &self.tags)
    }
}

/// Geometric errors and mesh quality of one configuration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub delta1: f64,
    pub delta2: f64,
    /// `max |u|` of the step that produced this configuration.
    pub max_u: f64,
    pub max_shape_regularity: f64,
    /// Step size actually applied.
    pub gamma: f64,
}

/// Discrete morphing: positions of the deformed reference mesh.
pub struct MorphState {
    pub reference: Mesh2D,
    pub positions: Vec<Vec2>,
    pub iteration: usize,
    pub initial: IterationRecord,
    pub history: Vec<IterationRecord>,
    pub config: MorphConfig,
    /// Wall time of each step in seconds, kept apart from the history so
    /// that histories are reproducible bit for bit.
    pub step_seconds: Vec<f64>,
    fixed: Vec<Option<f64>>,
    solver: Solver,
    field: Option<VectorDistanceField>,
}

impl MorphState {
    pub fn new(reference: &Mesh2D, target: &MorphTarget, config: &MorphConfig) -> Result<Self> {
        config.validate()?;
        let mut fixed = vec![None; 2 * reference.n_vertices()];
        for name in &config.fixed_tags {
            let t = reference.tag_id(name)?;
            for e in reference.boundary_edges().iter().filter(|e| e.tag == t) {
                for &v in &e.v {
                    fixed[2 * v] = Some(0.0);
                    fixed[2 * v + 1] = Some(0.0);
                }
            }
        }
        let positions = reference.vertices().to_vec();
        let field = target.field(reference, &positions)?;
        let initial = record(reference, &positions, target, &field, config, 0, 0.0, 0.0)?;
        Ok(MorphState {
            reference: reference.clone(),
            positions,
            iteration: 0,
            initial,
            history: Vec::new(),
            config: config.clone(),
            step_seconds: Vec::new(),
            fixed,
            solver: Solver::new(),
            field: Some(field),
        })
    }

    pub fn current(&self) -> &IterationRecord {
        self.history.last().unwrap_or(&self.initial)
    }

    /// The metric the stopping rule looks at.
    pub fn stopping_metric(&self) -> f64 {
        let r = self.current();
        match self.config.algorithm {
            Algorithm::Vdf => r.delta2,
            Algorithm::Sdf => r.delta1,
        }
    }

    pub fn converged(&self) -> bool {
        self.stopping_metric() < self.config.epsilon
    }

    /// `phi - Id` on the reference vertices.
    pub fn displacement(&self) -> Vec<Vec2> {
        self.positions
            .iter()
            .zip(self.reference.vertices())
            .map(|(&p, &q)| p - q)
            .collect()
    }
}

#[allow(clippy::too_many_arguments)]
fn record(
    mesh: &Mesh2D,
    x: &[Vec2],
    target: &MorphTarget,
    field: &VectorDistanceField,
    config: &MorphConfig,
    iteration: usize,
    max_u: f64,
    gamma: f64,
) -> Result<IterationRecord> {
    let d2 = match config.sampling {
        Sampling::NodesOnly => field.max_distance(),
        s => delta2(mesh, x, &target.index, &target.tags, s)?,
    };
    Ok(IterationRecord {
        iteration,
        delta1: delta1(mesh, x, &target.index, config.sampling),
        delta2: d2,
        max_u,
        max_shape_regularity: shape_regularity(mesh, x, None)?.max,
        gamma,
    })
}

/// Load vector of the configured algorithm at the current configuration.
pub fn assemble_load(
    mesh: &Mesh2D,
    x: &[Vec2],
    target: &MorphTarget,
    field: &VectorDistanceField,
    config: &MorphConfig,
) -> Result<Vec<f64>> {
    match config.algorithm {
        Algorithm::Sdf => Ok(assemble_rhs_sdf(mesh, x, &target.index)),
        Algorithm::Vdf => {
            let mut b = assemble_rhs_points(mesh, x, target.points(), config.elastic.beta1)?;
            let l = assemble_rhs_lines(mesh, x, field, config.elastic.beta2, config.elastic.line_form)?;
            for (p, q) in b.iter_mut().zip(l) {
                *p += q;
            }
            Ok(b)
        }
    }
}

/// Solves for the descent displacement `u` at the current configuration.
pub fn descent_direction(state: &mut MorphState, target: &MorphTarget) -> Result<Vec<Vec2>> {
    let mesh = &state.reference;
    let x = &state.positions;
    let field = match state.field.take() {
        Some(f) => f,
        None => target.field(mesh, x)?,
    };
    let a = assemble_operator(mesh, x, &state.config.elastic)?;
    let b = assemble_load(mesh, x, target, &field, &state.config)?;
    state.field = Some(field);
    let u = solve_with_fixed(&mut state.solver, &a, &b, &state.fixed)?;
    Ok(unflatten(&u))
}

/// One morphing iteration. A step that would invert an element is retried
/// with half the step size, up to `max_rejections` times.
pub fn morph_step(state: &mut MorphState, target: &MorphTarget) -> Result<()> {
    let started = std::time::Instant::now();
    let u = descent_direction(state, target)?;
    let max_u = u.iter().map(|v| v.norm()).fold(0.0, f64::max);
    let mut gamma = state.config.gamma;
    let mut tries = 0;
    let next = loop {
        let cand: Vec<Vec2> = state.positions.iter().zip(&u).map(|(&p, &d)| p + d * gamma).collect();
        let (amin, tri) = state.reference.min_signed_area(&cand);
        if amin > 0.0 {
            break cand;
        }
        if tries == state.config.max_rejections {
            return Err(Error::StepRejected(format!(
                "iteration {}: triangle {tri} inverted even with gamma = {gamma:e}",
                state.iteration + 1
            )));
        }
        log::debug!("iteration {}: step rejected (triangle {tri}), halving gamma", state.iteration + 1);
        gamma *= 0.5;
        tries += 1;
    };
    state.positions = next;
    state.iteration += 1;
    let field = target.field(&state.reference, &state.positions)?;
    let rec = record(
        &state.reference,
        &state.positions,
        target,
        &field,
        &state.config,
        state.iteration,
        max_u,
        gamma,
    )?;
    state.field = Some(field);
    state.history.push(rec);
    state.step_seconds.push(started.elapsed().as_secs_f64());
    Ok(())
}

/// Outcome of a morphing run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MorphResult {
    pub positions: Vec<Vec2>,
    pub converged: bool,
    pub iterations: usize,
    pub delta1: f64,
    pub delta2: f64,
    /// `phi - Id` on the reference vertices.
    pub displacement: Vec<Vec2>,
    pub initial: IterationRecord,
    pub history: Vec<IterationRecord>,
    #[serde(skip)]
    pub step_seconds: Vec<f64>,
}

impl MorphResult {
    /// History as CSV, one row per configuration starting with the initial
    /// one.
    pub fn history_csv(&self) -> String {
        let mut s = String::from("iteration,delta1,delta2,max_u,max_shape_regularity,gamma\n");
        for r in std::iter::once(&self.initial).chain(&self.history) {
            let _ = writeln!(
                s,
                "{},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
                r.iteration, r.delta1, r.delta2, r.max_u, r.max_shape_regularity, r.gamma
            );
        }
        s
    }

    pub fn write_history_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.history_csv()).map_err(|e| Error::io(path, e))
    }

    /// Per-step wall times as CSV.
    pub fn timing_csv(&self) -> String {
        let mut s = String::from("iteration,seconds\n");
        for (i, t) in self.step_seconds.iter().enumerate() {
            let _ = writeln!(s, "{},{t:.6e}", i + 1);
        }
        s
    }
}

impl From<MorphState> for MorphResult {
    fn from(s: MorphState) -> Self {
        let r = *s.current();
        let converged = s.converged();
        let displacement = s.displacement();
        MorphResult {
            positions: s.positions,
            converged,
            iterations: s.iteration,
            delta1: r.delta1,
            delta2: r.delta2,
            displacement,
            initial: s.initial,
            history: s.history,
            step_seconds: s.step_seconds,
        }
    }
}

/// Iterates until the stopping metric drops below `epsilon` or
/// `max_iterations` is reached, calling `observe` after every step.
pub fn run_observed(
    reference: &Mesh2D,
    target: &MorphTarget,
    config: &MorphConfig,
    mut observe: impl FnMut(&MorphState),
) -> Result<MorphResult> {
    let mut state = MorphState::new(reference, target, config)?;
    let mut best = state.stopping_metric();
    let mut increases = 0;
    while !state.converged() && state.iteration < config.max_iterations {
        let before = state.stopping_metric();
        morph_step(&mut state, target)?;
        observe(&state);
        let now = state.stopping_metric();
        best = best.min(now);
        if now > before {
            increases += 1;
            if increases >= config.divergence_window {
                return Err(Error::Diverged(format!(
                    "stopping metric increased {increases} times in a row (iteration {}, value {now:e}, best {best:e})",
                    state.iteration
                )));
            }
        } else {
            increases = 0;
        }
    }
    Ok(state.into())
}

pub fn run(reference: &Mesh2D, target: &MorphTarget, config: &MorphConfig) -> Result<MorphResult> {
    run_observed(reference, target, config, |_| {})
}

/// Final correction outcome.
#[derive(Debug, Clone, PartialEq)]
pub struct Correction {
    pub result: MorphResult,
    /// False when the correction would have inverted an element and was
    /// rolled back.
    pub applied: bool,
    /// `max |u*|` over all vertices.
    pub max_correction: f64,
    /// `max |D|` over the boundary nodes.
    pub max_boundary: f64,
}

/// Moves every boundary node onto its target and extends the boundary
/// displacement elastically into the domain.
pub fn final_correction(
    reference: &Mesh2D,
    result: &MorphResult,
    target: &MorphTarget,
    config: &MorphConfig,
) -> Result<Correction> {
    let x = &result.positions;
    let field = target.field(reference, x)?;
    let d = nodal_boundary_displacement(reference, x, &target.index, &target.tags, &field);
    let max_boundary = d.iter().map(|v| v.norm()).fold(0.0, f64::max);
    let u = solve_dirichlet_correction(reference, x, &d, &config.elastic)?;
    let max_correction = u.iter().map(|v| v.norm()).fold(0.0, f64::max);
    let y: Vec<Vec2> = x.iter().zip(&u).map(|(&p, &q)| p + q).collect();
    let (amin, tri) = reference.min_signed_area(&y);
    if amin <= 0.0 {
        log::warn!("final correction inverts triangle {tri}; rolled back");
        return Ok(Correction { result: result.clone(), applied: false, max_correction, max_boundary });
    }
    let field = target.field(reference, &y)?;
    let mut out = result.clone();
    out.delta2 = field.max_distance();
    out.delta1 = delta1(reference, &y, &target.index, config.sampling);
    out.displacement = y.iter().zip(reference.vertices()).map(|(&p, &q)| p - q).collect();
    out.positions = y;
    Ok(Correction { result: out, applied: true, max_correction, max_boundary })
}
