//! Output directory helpers.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use morphrom::mesh::{write_atomic, write_json, BoundaryPolyline};
use serde::Serialize;

pub fn ensure_dir(p: &Path) -> Result<()> {
    std::fs::create_dir_all(p).with_context(|| format!("creating {}", p.display()))
}

pub fn write_text(p: &Path, text: &str) -> Result<()> {
    write_atomic(p, text.as_bytes()).with_context(|| format!("writing {}", p.display()))
}

pub fn write_value<T: Serialize + ?Sized>(p: &Path, v: &T) -> Result<()> {
    write_json(p, v).with_context(|| format!("writing {}", p.display()))
}

/// Target polylines from a file or from every `*.json` of a directory,
/// sorted by file name. Ids are the file stems.
pub fn read_targets(p: &Path) -> Result<Vec<(String, BoundaryPolyline)>> {
    let files: Vec<PathBuf> = if p.is_dir() {
        let mut v: Vec<PathBuf> = std::fs::read_dir(p)
            .with_context(|| format!("listing {}", p.display()))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|f| f.extension().is_some_and(|x| x == "json"))
            .collect();
        v.sort();
        v
    } else {
        vec![p.to_path_buf()]
    };
    if files.is_empty() {
        bail!("no target polylines (*.json) in {}", p.display());
    }
    files
        .iter()
        .map(|f| {
            let id = f.file_stem().and_then(|s| s.to_str()).unwrap_or("target").to_string();
            let poly = BoundaryPolyline::load(f).with_context(|| format!("reading target {}", f.display()))?;
            Ok((id, poly))
        })
        .collect()
}

/// Applies `f` to every item on up to `workers` threads, keeping the input
/// order in the result.
pub fn parallel_map<T: Sync, R: Send>(items: &[T], workers: usize, f: impl Fn(&T) -> R + Sync) -> Vec<R> {
    let workers = workers.clamp(1, items.len().max(1));
    let chunk = items.len().div_ceil(workers).max(1);
    std::thread::scope(|s| {
        let handles: Vec<_> = items.chunks(chunk).map(|c| s.spawn(|| c.iter().map(&f).collect::<Vec<R>>())).collect();
        handles.into_iter().flat_map(|h| h.join().expect("worker panicked")).collect()
    })
}
