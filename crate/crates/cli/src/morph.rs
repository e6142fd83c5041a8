//! `morphrom morph`: one high-fidelity morphing run.

use std::path::PathBuf;
use std::time::Instant;

use anyhow::{Context, Result};
use morphrom::mesh::{export_vtk, load_mesh, save_mesh, BoundaryPolyline, NodalField};
use morphrom::instrument;
use morphrom::morph::{final_correction, run as morph_run, MorphConfig, MorphTarget};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::config::{load_with, overlay_defaults, preset};
use crate::output::{ensure_dir, write_text, write_value};
use crate::{exit, Common};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MorphRunConfig {
    /// `plate` or `airfoil`: the defaults under `morph`.
    #[serde(default)]
    pub preset: Option<String>,
    pub reference: PathBuf,
    pub target: PathBuf,
    pub morph: MorphConfig,
    /// Snap the converged boundary onto the target.
    #[serde(default)]
    pub final_correction: bool,
}

/// Fills `morph` from the preset named in the document.
pub fn morph_defaults(doc: &mut Value, key: &str) -> Result<()> {
    let defaults = match preset(doc)?.as_str() {
        "airfoil" => MorphConfig::airfoil(),
        _ => MorphConfig::plate(),
    };
    overlay_defaults(doc, key, serde_json::to_value(defaults)?)
}

#[derive(Debug, Serialize)]
struct Status {
    status: &'static str,
    converged: bool,
    iterations: usize,
    delta1: f64,
    delta2: f64,
    correction_applied: Option<bool>,
    max_correction: Option<f64>,
    factorizations: u64,
    distance_queries: u64,
}

pub fn run(c: &Common) -> Result<u8> {
    let loaded = load_with::<MorphRunConfig>(c.config.as_deref(), &c.sets, |d| morph_defaults(d, "morph"))?;
    let cfg = &loaded.config;
    let reference = load_mesh(loaded.path(&cfg.reference)).context("reading reference mesh")?;
    let poly = BoundaryPolyline::load(loaded.path(&cfg.target)).context("reading target polyline")?;
    let target = MorphTarget::new(&reference, &poly)?;

    let before = instrument::snapshot();
    let t0 = Instant::now();
    let mut result = morph_run(&reference, &target, &cfg.morph)?;
    let mut correction = None;
    if cfg.final_correction && result.converged {
        let corr = final_correction(&reference, &result, &target, &cfg.morph)?;
        correction = Some((corr.applied, corr.max_correction));
        result = corr.result;
    }
    log::info!("morphing took {:.3} s", t0.elapsed().as_secs_f64());
    let counters = instrument::snapshot().since(before);

    ensure_dir(&c.out)?;
    write_text(&c.out.join("history.csv"), &result.history_csv())?;
    write_text(&c.out.join("timing.csv"), &result.timing_csv())?;
    write_value(&c.out.join("result.json"), &result)?;
    save_mesh(&reference.with_vertices(result.positions.clone())?, c.out.join("morphed.json"))?;
    export_vtk(
        &reference,
        Some(&result.positions),
        &[NodalField::Vector("displacement", &result.displacement)],
        c.out.join("morphed.vtk"),
    )?;
    let status = Status {
        status: if result.converged { "converged" } else { "not_converged" },
        converged: result.converged,
        iterations: result.iterations,
        delta1: result.delta1,
        delta2: result.delta2,
        correction_applied: correction.map(|c| c.0),
        max_correction: correction.map(|c| c.1),
        factorizations: counters.factorizations,
        distance_queries: counters.distance_queries,
    };
    write_value(&c.out.join("status.json"), &status)?;
    if result.converged {
        println!("{}", serde_json::to_string(&status)?);
        Ok(exit::OK)
    } else {
        eprintln!("{}", serde_json::to_string(&status)?);
        Ok(exit::ERROR)
    }
}
