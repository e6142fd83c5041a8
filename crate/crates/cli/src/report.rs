//! `morphrom report`: SVG plots from run artifacts.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use crate::config::load;
use crate::output::{ensure_dir, write_text, write_value};
use crate::svg::{BarPlot, LinePlot, Series};
use crate::{exit, Common};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReportConfig {
    /// Directories holding morph, offline, online or learn outputs.
    pub inputs: Vec<PathBuf>,
}

/// Artifacts the report knows how to draw.
const EXPECTED: [&str; 6] =
    ["history.csv", "histories/*.csv", "eigenvalues.csv", "geometric_errors.csv", "online_summary.csv", "q2_curve.csv"];

/// Columns of a CSV file by header name.
struct Table {
    columns: BTreeMap<String, Vec<String>>,
}

impl Table {
    fn read(p: &Path) -> Result<Table> {
        let mut r = csv::Reader::from_path(p).with_context(|| format!("reading {}", p.display()))?;
        let headers: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
        let mut columns: BTreeMap<String, Vec<String>> = headers.iter().map(|h| (h.clone(), Vec::new())).collect();
        for rec in r.records() {
            let rec = rec.with_context(|| format!("parsing {}", p.display()))?;
            for (h, v) in headers.iter().zip(rec.iter()) {
                columns.get_mut(h).expect("header column").push(v.to_string());
            }
        }
        Ok(Table { columns })
    }

    fn text(&self, name: &str) -> Result<&[String]> {
        self.columns.get(name).map(Vec::as_slice).with_context(|| format!("missing column {name}"))
    }

    fn num(&self, name: &str) -> Result<Vec<f64>> {
        self.text(name)?
            .iter()
            .map(|v| v.parse::<f64>().with_context(|| format!("column {name}: `{v}` is not a number")))
            .collect()
    }
}

fn xy(x: &[f64], y: &[f64]) -> Vec<(f64, f64)> {
    x.iter().copied().zip(y.iter().copied()).collect()
}

fn line(title: &str, x_label: &str, y_label: &str, log_y: bool, series: Vec<Series>) -> String {
    let legend = series.len() <= 8;
    LinePlot { title: title.into(), x_label: x_label.into(), y_label: y_label.into(), log_y, series, legend }.render()
}

fn history_plot(p: &Path) -> Result<String> {
    let t = Table::read(p)?;
    let it = t.num("iteration")?;
    Ok(line(
        "Convergence",
        "iteration",
        "error",
        true,
        vec![
            Series { name: "delta1".into(), points: xy(&it, &t.num("delta1")?) },
            Series { name: "delta2".into(), points: xy(&it, &t.num("delta2")?) },
        ],
    ))
}

fn histories_plot(files: &[PathBuf]) -> Result<String> {
    let series = files
        .iter()
        .map(|f| {
            let t = Table::read(f)?;
            let name = f.file_stem().and_then(|s| s.to_str()).unwrap_or_default().to_string();
            Ok(Series { name, points: xy(&t.num("iteration")?, &t.num("delta2")?) })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(line("Convergence of the training samples", "iteration", "delta2", true, series))
}

fn eigen_plot(p: &Path) -> Result<String> {
    let t = Table::read(p)?;
    let s = Series { name: "relative eigenvalue".into(), points: xy(&t.num("index")?, &t.num("relative")?) };
    Ok(line("POD eigenvalue decay", "index", "eigenvalue / largest", true, vec![s]))
}

fn geometric_plot(p: &Path) -> Result<String> {
    let t = Table::read(p)?;
    let s = Series { name: "max delta2".into(), points: xy(&t.num("r")?, &t.num("delta2")?) };
    Ok(line("Geometric error of the truncated basis", "r", "delta2", true, vec![s]))
}

/// Converged samples per iteration count.
fn converged_plot(p: &Path) -> Result<String> {
    let t = Table::read(p)?;
    let status = t.text("status")?;
    let iters = t.text("iterations")?;
    let mut counts: BTreeMap<usize, f64> = BTreeMap::new();
    for (s, i) in status.iter().zip(iters) {
        if s == "converged" {
            *counts.entry(i.parse().with_context(|| format!("iteration count `{i}`"))?).or_default() += 1.0;
        }
    }
    let bars = counts.into_iter().map(|(k, v)| (k.to_string(), v)).collect();
    Ok(BarPlot {
        title: "Converged samples".into(),
        x_label: "online iterations".into(),
        y_label: "samples".into(),
        bars,
    }
    .render())
}

fn q2_plot(p: &Path) -> Result<String> {
    let t = Table::read(p)?;
    let r = t.num("r")?;
    let mut series = vec![Series { name: "q2".into(), points: xy(&r, &t.num("q2")?) }];
    let mut k = 2;
    while let Ok(v) = t.num(&format!("q2_{k}")) {
        series.push(Series { name: format!("q2_{k}"), points: xy(&r, &v) });
        k += 1;
    }
    Ok(line("Q2 against the number of modes", "r", "Q2", false, series))
}

#[derive(Debug, Serialize)]
struct Plot {
    file: String,
    source: String,
}

pub fn run(c: &Common) -> Result<u8> {
    let loaded = load::<ReportConfig>(c.config.as_deref(), &c.sets)?;
    if loaded.config.inputs.is_empty() {
        bail!("no input directories; expected any of: {}", EXPECTED.join(", "));
    }
    let mut plots: Vec<(String, PathBuf, String)> = Vec::new();
    for (k, dir) in loaded.config.inputs.iter().enumerate() {
        let dir = loaded.path(dir);
        let prefix = if loaded.config.inputs.len() > 1 { format!("{k}_") } else { String::new() };
        let single: [(&str, &str, fn(&Path) -> Result<String>); 5] = [
            ("history.csv", "convergence.svg", history_plot),
            ("eigenvalues.csv", "eigenvalues.svg", eigen_plot),
            ("geometric_errors.csv", "geometric_errors.svg", geometric_plot),
            ("online_summary.csv", "converged_samples.svg", converged_plot),
            ("q2_curve.csv", "q2.svg", q2_plot),
        ];
        for (input, name, f) in single {
            let p = dir.join(input);
            if p.is_file() {
                plots.push((format!("{prefix}{name}"), p.clone(), f(&p)?));
            }
        }
        let hist = dir.join("histories");
        if hist.is_dir() {
            let mut files: Vec<PathBuf> = std::fs::read_dir(&hist)?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|f| f.extension().is_some_and(|x| x == "csv"))
                .collect();
            files.sort();
            if !files.is_empty() {
                plots.push((format!("{prefix}convergence_samples.svg"), hist.clone(), histories_plot(&files)?));
            }
        }
    }
    if plots.is_empty() {
        bail!("nothing to plot; expected any of: {}", EXPECTED.join(", "));
    }
    ensure_dir(&c.out)?;
    let mut index = Vec::new();
    for (name, source, svg) in plots {
        write_text(&c.out.join(&name), &svg)?;
        index.push(Plot { file: name, source: source.display().to_string() });
    }
    write_value(&c.out.join("report.json"), &serde_json::json!({ "plots": index }))?;
    println!("{}", serde_json::json!({ "plots": index.len() }));
    Ok(exit::OK)
}
