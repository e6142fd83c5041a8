//! Offline training of the reduced morphing model.

use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::codec::Dense;
use crate::error::{Error, Result};
use crate::fem::{assemble_mass, flatten, ElasticConfig};
use crate::mesh::{read_json, write_json, BoundaryPolyline, Mesh2D};
use crate::morph::{final_correction, run, MorphConfig, MorphResult, MorphTarget};
use crate::regress::{fit_feature_basis, shape_features, FeatureBasis, GprConfig, GprModel, ScalarModel};

use super::{
    gamma_online, online_solve, realize, reduced_functional, select_r, snapshot_pod, OnlineReport,
    OnlineSettings, PodBasis, RSelection,
};

/// Version tag of the persisted model layout.
pub const MODEL_VERSION: u32 = 1;

fn yes() -> bool {
    true
}

fn default_q() -> usize {
    5
}

fn default_delta_geo() -> f64 {
    5e-4
}

fn default_online_iterations() -> usize {
    200
}

fn one() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OfflineConfig {
    pub morph: MorphConfig,
    /// Snap each converged snapshot onto its target boundary.
    #[serde(default = "yes")]
    pub final_correction: bool,
    #[serde(default)]
    pub selection: RSelection,
    /// Number of feature modes.
    #[serde(default = "default_q")]
    pub n_features: usize,
    #[serde(default)]
    pub gpr: GprConfig,
    /// Online convergence threshold on `Delta2`.
    #[serde(default = "default_delta_geo")]
    pub delta_geo: f64,
    #[serde(default = "default_online_iterations")]
    pub max_online_iterations: usize,
    /// Online step size; derived from the reduced load when absent.
    #[serde(default)]
    pub gamma_online: Option<f64>,
    /// Gradient threshold of the out-of-distribution test; the training
    /// average of `|B|` when absent.
    #[serde(default)]
    pub delta_grad: Option<f64>,
    #[serde(default = "one")]
    pub workers: usize,
}

impl OfflineConfig {
    pub fn plate() -> Self {
        OfflineConfig {
            morph: MorphConfig::plate(),
            final_correction: true,
            selection: RSelection::default(),
            n_features: default_q(),
            gpr: GprConfig::default(),
            delta_geo: default_delta_geo(),
            max_online_iterations: default_online_iterations(),
            gamma_online: None,
            delta_grad: None,
            workers: 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.morph.validate()?;
        if !(self.delta_geo > 0.0) {
            return Err(Error::InvalidParameter(format!("delta_geo {} must be positive", self.delta_geo)));
        }
        if self.n_features == 0 || self.workers == 0 {
            return Err(Error::InvalidParameter("n_features and workers must be positive".into()));
        }
        if let Some(g) = self.gamma_online {
            if !(g >= 0.0 && g.is_finite()) {
                return Err(Error::InvalidParameter(format!("gamma_online {g} must be non-negative")));
            }
        }
        Ok(())
    }
}

/// Everything the online phase needs, self-contained.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReducedModel {
    pub version: u32,
    pub reference: Mesh2D,
    pub elastic: ElasticConfig,
    /// The selected `r` modes; eigenvalues cover all snapshots.
    pub basis: PodBasis,
    pub training_ids: Vec<String>,
    pub features: FeatureBasis,
    pub feature_coordinates: Dense,
    /// Map from feature coordinates to morphing coordinates.
    pub initializer: GprModel,
    pub delta_geo: f64,
    pub delta_grad: f64,
    pub gamma_online: f64,
    pub max_online_iterations: usize,
    /// `max_i Delta2(phi_r(alpha^i))` for every candidate `r`.
    pub geometric_errors: Vec<f64>,
    #[serde(default)]
    pub scalar: Option<ScalarModel>,
}

impl ReducedModel {
    pub fn r(&self) -> usize {
        self.basis.n_modes()
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        write_json(path, self)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let m: ReducedModel = read_json(path)?;
        if m.version != MODEL_VERSION {
            return Err(Error::Parse(format!("model version {} (expected {MODEL_VERSION})", m.version)));
        }
        Ok(m)
    }

    pub fn settings(&self) -> OnlineSettings {
        OnlineSettings {
            delta_geo: self.delta_geo,
            delta_grad: self.delta_grad,
            max_iterations: self.max_online_iterations,
            gamma: self.gamma_online,
        }
    }

    /// Feature coordinates of a target and the predicted initial
    /// coordinates.
    pub fn initialize(&self, target: &MorphTarget) -> Result<(Vec<f64>, Vec<f64>)> {
        let d = self.features.coordinates(&shape_features(&self.reference, target)?)?;
        let alpha = self.initializer.predict_mean(&d)?;
        Ok((d, alpha))
    }

    /// Builds the target and runs the online iteration from the predicted
    /// initialization.
    pub fn solve(&self, target: &BoundaryPolyline, settings: &OnlineSettings) -> Result<OnlineReport> {
        let t = MorphTarget::new(&self.reference, target)?;
        let (_, alpha0) = self.initialize(&t)?;
        online_solve(&self.reference, &self.basis, &self.elastic, &t, &alpha0, settings)
    }
}

/// Wall times of the offline phases in seconds.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct OfflineTimings {
    /// Morphing (and correction) time of each target.
    pub morph: Vec<f64>,
    pub pod: f64,
    pub selection: f64,
    pub features: f64,
    pub regression: f64,
    pub total: f64,
}

pub struct OfflineOutput {
    pub model: ReducedModel,
    /// High-fidelity result of each target, corrected when configured.
    pub results: Vec<MorphResult>,
    pub timings: OfflineTimings,
}

/// Runs `f` on every item with up to `workers` threads; results keep the
/// input order.
pub(crate) fn parallel_map<T: Sync, R: Send>(
    items: &[T],
    workers: usize,
    f: impl Fn(usize, &T) -> R + Sync,
) -> Vec<R> {
    let next = AtomicUsize::new(0);
    let out: Mutex<Vec<Option<R>>> = Mutex::new((0..items.len()).map(|_| None).collect());
    std::thread::scope(|s| {
        for _ in 0..workers.clamp(1, items.len().max(1)) {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= items.len() {
                    break;
                }
                let r = f(i, &items[i]);
                out.lock().expect("result lock")[i] = Some(r);
            });
        }
    });
    out.into_inner().expect("result lock").into_iter().map(|r| r.expect("every item mapped")).collect()
}

fn morph_target(
    reference: &Mesh2D,
    target: &MorphTarget,
    cfg: &OfflineConfig,
) -> Result<MorphResult> {
    let result = run(reference, target, &cfg.morph)?;
    if !result.converged {
        return Err(Error::NotConverged(format!(
            "stopping metric above {:e} after {} iterations",
            cfg.morph.epsilon, result.iterations
        )));
    }
    if !cfg.final_correction {
        return Ok(result);
    }
    let c = final_correction(reference, &result, target, &cfg.morph)?;
    Ok(c.result)
}

/// Morphs every training target, builds the POD basis, selects `r`, fits
/// the feature basis and the initializer.
pub fn offline_workflow(
    reference: &Mesh2D,
    targets: &[(String, BoundaryPolyline)],
    cfg: &OfflineConfig,
) -> Result<OfflineOutput> {
    cfg.validate()?;
    if targets.is_empty() {
        return Err(Error::InvalidParameter("no training targets".into()));
    }
    let started = Instant::now();
    let prepared = targets
        .iter()
        .enumerate()
        .map(|(i, (_, p))| {
            MorphTarget::new(reference, p).map_err(|e| Error::Target { index: i, source: Box::new(e) })
        })
        .collect::<Result<Vec<_>>>()?;
    let morphed = parallel_map(&prepared, cfg.workers, |i, t| {
        let t0 = Instant::now();
        let r = morph_target(reference, t, cfg);
        match &r {
            Ok(m) => log::info!("target {} ({}) morphed in {} iterations", i, targets[i].0, m.iterations),
            Err(e) => log::error!("target {} ({}) failed: {e}", i, targets[i].0),
        }
        r.map(|m| (m, t0.elapsed().as_secs_f64()))
    });
    let mut results = Vec::with_capacity(targets.len());
    let mut timings = OfflineTimings::default();
    for (i, r) in morphed.into_iter().enumerate() {
        let (m, t) = r.map_err(|e| Error::Target { index: i, source: Box::new(e) })?;
        results.push(m);
        timings.morph.push(t);
    }

    let t0 = Instant::now();
    let snapshots: Vec<Vec<f64>> = results.iter().map(|m| flatten(&m.displacement)).collect();
    let mass = assemble_mass(reference)?;
    let pod = snapshot_pod(&snapshots, &mass)?;
    timings.pod = t0.elapsed().as_secs_f64();

    let t0 = Instant::now();
    let selection = select_r(reference, &pod, cfg.selection, &prepared)?;
    let basis = pod.truncate(selection.r)?;
    let gamma = match cfg.gamma_online {
        Some(g) => g,
        None => gamma_online(reference, &basis, &cfg.morph.elastic)?,
    };
    let alphas = basis.coordinates.to_rows();
    let delta_grad = match cfg.delta_grad {
        Some(d) => d,
        None => {
            let mut sum = 0.0;
            for (a, t) in alphas.iter().zip(&prepared) {
                let m = realize(reference, &basis, a)?;
                let field = t.field(reference, &m.positions)?;
                let b = reduced_functional(reference, &basis, &m.positions, t, &field, &cfg.morph.elastic)?;
                sum += b.iter().map(|v| v * v).sum::<f64>().sqrt();
            }
            sum / alphas.len() as f64
        }
    };
    timings.selection = t0.elapsed().as_secs_f64();
    log::info!("selected r = {} of {} modes, gamma_online = {gamma:e}, delta_grad = {delta_grad:e}", selection.r, pod.n_modes());

    let t0 = Instant::now();
    let fields = prepared.iter().map(|t| shape_features(reference, t)).collect::<Result<Vec<_>>>()?;
    let (features, coords) = fit_feature_basis(reference, &fields, cfg.n_features)?;
    timings.features = t0.elapsed().as_secs_f64();

    let t0 = Instant::now();
    let initializer = GprModel::train(&coords, &alphas, &cfg.gpr)?;
    timings.regression = t0.elapsed().as_secs_f64();
    timings.total = started.elapsed().as_secs_f64();

    let model = ReducedModel {
        version: MODEL_VERSION,
        reference: reference.clone(),
        elastic: cfg.morph.elastic.clone(),
        basis,
        training_ids: targets.iter().map(|(id, _)| id.clone()).collect(),
        features,
        feature_coordinates: Dense::from_rows(&coords),
        initializer,
        delta_geo: cfg.delta_geo,
        delta_grad,
        gamma_online: gamma,
        max_online_iterations: cfg.max_online_iterations,
        geometric_errors: selection.geometric_errors,
        scalar: None,
    };
    Ok(OfflineOutput { model, results, timings })
}
