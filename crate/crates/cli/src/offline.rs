//! `morphrom offline`: training family to reduced model.

use std::path::PathBuf;

use anyhow::{Context, Result};
use morphrom::mesh::load_mesh;
use morphrom::morph::MorphConfig;
use morphrom::rom::{offline_workflow, OfflineConfig};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::bench::OfflineRecord;
use crate::config::{load_with, overlay_defaults, preset};
use crate::output::{ensure_dir, read_targets, write_text, write_value};
use crate::{exit, Batch};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OfflineRunConfig {
    #[serde(default)]
    pub preset: Option<String>,
    pub reference: PathBuf,
    /// A directory of target polylines (sorted by name) or one file.
    pub targets: PathBuf,
    pub offline: OfflineConfig,
}

fn defaults(doc: &mut Value) -> Result<()> {
    let mut d = OfflineConfig::plate();
    if preset(doc)? == "airfoil" {
        d.morph = MorphConfig::airfoil();
    }
    overlay_defaults(doc, "offline", serde_json::to_value(d)?)
}

pub fn run(b: &Batch) -> Result<u8> {
    let c = &b.common;
    let loaded = load_with::<OfflineRunConfig>(c.config.as_deref(), &c.sets, defaults)?;
    let mut cfg = loaded.config.offline.clone();
    if let Some(w) = b.workers {
        cfg.workers = w;
    }
    let reference = load_mesh(loaded.path(&loaded.config.reference)).context("reading reference mesh")?;
    let targets = read_targets(&loaded.path(&loaded.config.targets))?;
    let out = offline_workflow(&reference, &targets, &cfg).map_err(|e| match e {
        morphrom::Error::Target { index, source } => {
            anyhow::anyhow!("training target {} ({}): {source}", index, targets[index].0)
        }
        e => e.into(),
    })?;

    ensure_dir(&c.out.join("histories"))?;
    out.model.save(c.out.join("model.json"))?;
    write_text(&c.out.join("eigenvalues.csv"), &out.model.basis.eigenvalue_csv())?;
    let mut geo = String::from("r,delta2\n");
    for (i, e) in out.model.geometric_errors.iter().enumerate() {
        geo.push_str(&format!("{},{e:.17e}\n", i + 1));
    }
    write_text(&c.out.join("geometric_errors.csv"), &geo)?;
    for ((id, _), r) in targets.iter().zip(&out.results) {
        write_text(&c.out.join("histories").join(format!("{id}.csv")), &r.history_csv())?;
    }
    let record = OfflineRecord {
        ids: targets.iter().map(|t| t.0.clone()).collect(),
        iterations: out.results.iter().map(|r| r.iterations).collect(),
        timings: out.timings.clone(),
        r: out.model.r(),
    };
    write_value(&c.out.join("offline_benchmark.json"), &record)?;
    println!(
        "{}",
        serde_json::json!({
            "status": "ok",
            "snapshots": targets.len(),
            "r": out.model.r(),
            "delta_grad": out.model.delta_grad,
            "gamma_online": out.model.gamma_online,
            "seconds": out.timings.total,
        })
    );
    Ok(exit::OK)
}
