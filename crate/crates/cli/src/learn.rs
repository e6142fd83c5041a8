//! `morphrom learn` and `morphrom predict`: scalar regression on
//! `(alpha, mu)`.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use morphrom::mesh::read_json;
use morphrom::regress::{q2_score, GprConfig, ScalarDataset, ScalarModel, ScalarSample};
use morphrom::rom::ReducedModel;
use serde::{Deserialize, Serialize};

use crate::config::{load, Loaded};
use crate::online::TargetReport;
use crate::output::{ensure_dir, write_text, write_value};
use crate::synth::Manifest;
use crate::{exit, Common};

/// Where samples come from.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "from", rename_all = "snake_case", deny_unknown_fields)]
pub enum DataSource {
    /// A dataset file.
    Dataset { path: PathBuf },
    /// Training coordinates of a reduced model; `mu` and outputs from the
    /// synthesis manifest.
    Training { manifest: PathBuf, model: PathBuf },
    /// Coordinates from online reports (`<id>.json`) of manifest samples.
    Online { manifest: PathBuf, reports: PathBuf },
}

fn manifest_index(path: &Path) -> Result<BTreeMap<String, (Vec<f64>, Vec<f64>)>> {
    let m: Manifest = read_json(path).with_context(|| format!("reading manifest {}", path.display()))?;
    Ok(m.samples.into_iter().map(|s| (s.id, (s.mu, s.outputs))).collect())
}

fn sample(id: &str, alpha: Vec<f64>, index: &BTreeMap<String, (Vec<f64>, Vec<f64>)>) -> Result<ScalarSample> {
    let (mu, outputs) = index.get(id).ok_or_else(|| anyhow!("sample {id} is not in the manifest"))?;
    Ok(ScalarSample { id: id.to_string(), alpha, mu: mu.clone(), outputs: outputs.clone() })
}

pub fn read_source<T>(loaded: &Loaded<T>, src: &DataSource) -> Result<ScalarDataset> {
    let data = match src {
        DataSource::Dataset { path } => read_json(loaded.path(path)).context("reading dataset")?,
        DataSource::Training { manifest, model } => {
            let index = manifest_index(&loaded.path(manifest))?;
            let model = ReducedModel::load(loaded.path(model)).context("reading reduced model")?;
            let rows = model.basis.coordinates.to_rows();
            let samples =
                model.training_ids.iter().zip(rows).map(|(id, a)| sample(id, a, &index)).collect::<Result<_>>()?;
            ScalarDataset { samples }
        }
        DataSource::Online { manifest, reports } => {
            let index = manifest_index(&loaded.path(manifest))?;
            let dir = loaded.path(reports);
            let mut samples = Vec::new();
            for id in index.keys() {
                let f = dir.join(format!("{id}.json"));
                if !f.exists() {
                    continue;
                }
                let r: TargetReport = read_json(&f).with_context(|| format!("reading report {}", f.display()))?;
                samples.push(sample(id, r.report.alpha, &index)?);
            }
            ScalarDataset { samples }
        }
    };
    if data.samples.is_empty() {
        bail!("no samples in {src:?}");
    }
    Ok(data)
}

fn truncate_alpha(data: &ScalarDataset, r: usize) -> ScalarDataset {
    ScalarDataset {
        samples: data
            .samples
            .iter()
            .map(|s| ScalarSample { alpha: s.alpha[..r.min(s.alpha.len())].to_vec(), ..s.clone() })
            .collect(),
    }
}

/// Q² of each output over samples that carry outputs; `None` when none do.
fn q2_per_output(model: &ScalarModel, data: &ScalarDataset) -> Result<Option<Vec<f64>>> {
    let labelled: Vec<&ScalarSample> = data.samples.iter().filter(|s| !s.outputs.is_empty()).collect();
    if labelled.is_empty() {
        return Ok(None);
    }
    let preds = labelled.iter().map(|s| Ok(model.predict(&s.alpha, &s.mu)?.mean)).collect::<Result<Vec<_>>>()?;
    let n_out = labelled[0].outputs.len();
    (0..n_out)
        .map(|k| {
            let t: Vec<f64> = labelled.iter().map(|s| s.outputs[k]).collect();
            let p: Vec<f64> = preds.iter().map(|p| p[k]).collect();
            Ok(q2_score(&t, &p)?)
        })
        .collect::<Result<Vec<_>>>()
        .map(Some)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LearnConfig {
    pub data: DataSource,
    #[serde(default)]
    pub gpr: GprConfig,
    /// Held-out samples scored after training.
    #[serde(default)]
    pub validation: Option<DataSource>,
    /// Also train on the first `r` coordinates for every `r` and score the
    /// validation set.
    #[serde(default)]
    pub sweep_r: bool,
}

pub fn run_learn(c: &Common) -> Result<u8> {
    let loaded = load::<LearnConfig>(c.config.as_deref(), &c.sets)?;
    let cfg = &loaded.config;
    let data = read_source(&loaded, &cfg.data)?;
    let validation = cfg.validation.as_ref().map(|v| read_source(&loaded, v)).transpose()?;
    let model = ScalarModel::train(&data, &cfg.gpr)?;
    ensure_dir(&c.out)?;
    write_value(&c.out.join("scalar_model.json"), &model)?;
    write_value(&c.out.join("dataset.json"), &data)?;
    let mut summary = serde_json::json!({
        "samples": data.samples.len(),
        "n_alpha": model.n_alpha,
        "n_mu": model.n_mu,
        "log_marginal_likelihood": model.gpr.outputs.iter().map(|o| o.log_marginal_likelihood).collect::<Vec<_>>(),
    });
    if let Some(v) = &validation {
        summary["q2"] = serde_json::to_value(q2_per_output(&model, v)?)?;
        if cfg.sweep_r {
            let names: Vec<String> =
                (1..=model.gpr.output_dim()).map(|k| if k == 1 { "q2".into() } else { format!("q2_{k}") }).collect();
            let mut csv = format!("r,{}\n", names.join(","));
            for r in 1..=model.n_alpha {
                let m = ScalarModel::train(&truncate_alpha(&data, r), &cfg.gpr)?;
                let q = q2_per_output(&m, &truncate_alpha(v, r))?.unwrap_or_default();
                let cols: Vec<String> = q.iter().map(|x| format!("{x:.17e}")).collect();
                csv.push_str(&format!("{r},{}\n", cols.join(",")));
            }
            write_text(&c.out.join("q2_curve.csv"), &csv)?;
        }
    }
    write_value(&c.out.join("learn_summary.json"), &summary)?;
    println!("{summary}");
    Ok(exit::OK)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PredictConfig {
    pub model: PathBuf,
    pub data: DataSource,
}

pub fn run_predict(c: &Common) -> Result<u8> {
    let loaded = load::<PredictConfig>(c.config.as_deref(), &c.sets)?;
    let model: ScalarModel = read_json(loaded.path(&loaded.config.model)).context("reading scalar model")?;
    let data = read_source(&loaded, &loaded.config.data)?;
    let n_out = model.gpr.output_dim();
    let mut header = vec!["id".to_string()];
    for k in 0..n_out {
        header.extend([format!("mean_{k}"), format!("variance_{k}"), format!("truth_{k}")]);
    }
    let mut csv = header.join(",") + "\n";
    for s in &data.samples {
        let p = model.predict(&s.alpha, &s.mu).with_context(|| format!("sample {}", s.id))?;
        let mut row = vec![s.id.clone()];
        for k in 0..n_out {
            row.push(format!("{:.17e}", p.mean[k]));
            row.push(format!("{:.17e}", p.variance[k]));
            row.push(s.outputs.get(k).map(|t| format!("{t:.17e}")).unwrap_or_default());
        }
        csv.push_str(&(row.join(",") + "\n"));
    }
    ensure_dir(&c.out)?;
    write_text(&c.out.join("predictions.csv"), &csv)?;
    let q2 = q2_per_output(&model, &data)?;
    let summary = serde_json::json!({ "samples": data.samples.len(), "q2": q2 });
    write_value(&c.out.join("predict_summary.json"), &summary)?;
    println!("{summary}");
    Ok(exit::OK)
}
