//! `morphrom online`: reduced solves for a batch of targets.

use std::path::PathBuf;
use std::time::Instant;

use anyhow::{Context, Result};
use morphrom::instrument::{self, Counters};
use morphrom::mesh::{export_vtk, read_json, BoundaryPolyline, NodalField};
use morphrom::rom::{realize, OnlineReport, OnlineStatus, ReducedModel};
use morphrom::Vec2;
use serde::{Deserialize, Serialize};

use crate::bench::{BenchmarkRecord, OfflineRecord};
use crate::config::load;
use crate::output::{ensure_dir, parallel_map, read_targets, write_text, write_value};
use crate::{exit, Batch};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OnlineRunConfig {
    pub model: PathBuf,
    /// A directory of target polylines (sorted by name) or one file.
    pub targets: PathBuf,
    /// Overrides of the settings stored in the model.
    #[serde(default)]
    pub delta_geo: Option<f64>,
    #[serde(default)]
    pub delta_grad: Option<f64>,
    #[serde(default)]
    pub max_iterations: Option<usize>,
    #[serde(default)]
    pub gamma: Option<f64>,
    /// Offline record used for the time ratio in `benchmark.json`.
    #[serde(default)]
    pub offline_benchmark: Option<PathBuf>,
    /// Write the realized morphing of every target as VTK.
    #[serde(default)]
    pub write_meshes: bool,
    #[serde(default = "one")]
    pub workers: usize,
}

fn one() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetReport {
    pub id: String,
    #[serde(flatten)]
    pub report: OnlineReport,
}

struct Solved {
    report: std::result::Result<OnlineReport, String>,
    seconds: f64,
    counters: Counters,
}

/// Worst outcome first: hard errors, then out of distribution, then the
/// iteration budget.
fn batch_exit(statuses: &[Option<OnlineStatus>]) -> u8 {
    if statuses.iter().any(Option::is_none) {
        exit::ERROR
    } else if statuses.contains(&Some(OnlineStatus::OutOfDistribution)) {
        exit::OUT_OF_DISTRIBUTION
    } else if statuses.contains(&Some(OnlineStatus::MaxIterGradientLarge)) {
        exit::MAX_ITERATIONS
    } else {
        exit::OK
    }
}

pub fn run(b: &Batch) -> Result<u8> {
    let c = &b.common;
    let loaded = load::<OnlineRunConfig>(c.config.as_deref(), &c.sets)?;
    let cfg = &loaded.config;
    let model = ReducedModel::load(loaded.path(&cfg.model)).context("reading reduced model")?;
    let targets = read_targets(&loaded.path(&cfg.targets))?;
    let offline: Option<OfflineRecord> = match &cfg.offline_benchmark {
        Some(p) => Some(read_json(loaded.path(p)).context("reading offline benchmark")?),
        None => None,
    };
    let mut settings = model.settings();
    settings.delta_geo = cfg.delta_geo.unwrap_or(settings.delta_geo);
    settings.delta_grad = cfg.delta_grad.unwrap_or(settings.delta_grad);
    settings.max_iterations = cfg.max_iterations.unwrap_or(settings.max_iterations);
    settings.gamma = cfg.gamma.unwrap_or(settings.gamma);

    let solve = |t: &(String, BoundaryPolyline)| {
        let before = instrument::snapshot();
        let t0 = Instant::now();
        let report = model.solve(&t.1, &settings).map_err(|e| e.to_string());
        Solved { report, seconds: t0.elapsed().as_secs_f64(), counters: instrument::snapshot().since(before) }
    };
    let solved = parallel_map(&targets, b.workers.unwrap_or(cfg.workers), solve);

    let reports = c.out.join("reports");
    ensure_dir(&reports)?;
    let mut summary = String::from("id,status,exit_code,iterations,initial_delta2,delta2,gradient_norm\n");
    let mut statuses = Vec::new();
    let (mut seconds, mut iterations) = (Vec::new(), Vec::new());
    let mut counters = Counters::default();
    for ((id, _), s) in targets.iter().zip(solved) {
        match s.report {
            Ok(report) => {
                summary.push_str(&format!(
                    "{id},{},{},{},{:.17e},{:.17e},{:.17e}\n",
                    serde_json::to_value(report.status)?.as_str().unwrap_or_default(),
                    report.status.exit_code(),
                    report.iterations,
                    report.initial_delta2,
                    report.delta2,
                    report.gradient_norm
                ));
                if cfg.write_meshes {
                    let m = realize(&model.reference, &model.basis, &report.alpha)?;
                    let u: Vec<Vec2> = m.positions.iter().zip(model.reference.vertices()).map(|(p, q)| *p - *q).collect();
                    export_vtk(
                        &model.reference,
                        Some(&m.positions),
                        &[NodalField::Vector("displacement", &u)],
                        reports.join(format!("{id}.vtk")),
                    )?;
                }
                statuses.push(Some(report.status));
                seconds.push(s.seconds);
                iterations.push(report.iterations);
                counters.factorizations += s.counters.factorizations;
                counters.distance_queries += s.counters.distance_queries;
                write_value(&reports.join(format!("{id}.json")), &TargetReport { id: id.clone(), report })?;
            }
            Err(msg) => {
                log::error!("target {id}: {msg}");
                summary.push_str(&format!("{id},error,{},,,,\n", exit::ERROR));
                write_value(&reports.join(format!("{id}.error.json")), &serde_json::json!({ "id": id, "message": msg }))?;
                statuses.push(None);
            }
        }
    }
    write_text(&c.out.join("online_summary.csv"), &summary)?;
    if let Some(rec) =
        BenchmarkRecord::new(offline.as_ref(), &seconds, iterations, counters.factorizations, counters.distance_queries)
    {
        write_value(&c.out.join("benchmark.json"), &rec)?;
    }
    let code = batch_exit(&statuses);
    let converged = statuses.iter().filter(|s| **s == Some(OnlineStatus::Converged)).count();
    println!(
        "{}",
        serde_json::json!({ "targets": statuses.len(), "converged": converged, "exit_code": code })
    );
    Ok(code)
}
