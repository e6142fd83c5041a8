//! Timing records of the offline and online phases.
//!
//! Times cover computation only; file reads and writes are outside the
//! measured spans.

use morphrom::rom::OfflineTimings;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OfflineRecord {
    pub ids: Vec<String>,
    pub iterations: Vec<usize>,
    pub timings: OfflineTimings,
    pub r: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stats {
    pub mean: f64,
    pub max: f64,
}

impl Stats {
    pub fn of(v: &[f64]) -> Option<Stats> {
        if v.is_empty() {
            return None;
        }
        Some(Stats { mean: v.iter().sum::<f64>() / v.len() as f64, max: v.iter().copied().fold(f64::MIN, f64::max) })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkRecord {
    /// Per-target high-fidelity time (morphing and correction).
    pub offline: Option<Stats>,
    pub offline_iterations: Vec<usize>,
    pub offline_phases: Option<OfflineTimings>,
    pub online: Stats,
    pub online_iterations: Vec<usize>,
    /// `offline.mean / online.mean` and `offline.max / online.max`.
    pub ratio_mean: Option<f64>,
    pub ratio_max: Option<f64>,
    /// Sparse factorizations and distance queries over all online solves.
    pub factorizations: u64,
    pub distance_queries: u64,
}

impl BenchmarkRecord {
    pub fn new(
        offline: Option<&OfflineRecord>,
        online_seconds: &[f64],
        online_iterations: Vec<usize>,
        factorizations: u64,
        distance_queries: u64,
    ) -> Option<Self> {
        let online = Stats::of(online_seconds)?;
        let off = offline.and_then(|o| Stats::of(&o.timings.morph));
        Some(BenchmarkRecord {
            offline: off,
            offline_iterations: offline.map(|o| o.iterations.clone()).unwrap_or_default(),
            offline_phases: offline.map(|o| o.timings.clone()),
            online,
            online_iterations,
            ratio_mean: off.map(|o| o.mean / online.mean),
            ratio_max: off.map(|o| o.max / online.max),
            factorizations,
            distance_queries,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ratio_uses_recorded_times() {
        let off = OfflineRecord {
            ids: vec!["a".into(), "b".into()],
            iterations: vec![10, 20],
            timings: OfflineTimings { morph: vec![2.0, 6.0], ..Default::default() },
            r: 3,
        };
        let b = BenchmarkRecord::new(Some(&off), &[0.1, 0.3], vec![1, 2], 0, 5).unwrap();
        assert_eq!(b.offline, Some(Stats { mean: 4.0, max: 6.0 }));
        assert!((b.ratio_mean.unwrap() - 20.0).abs() < 1e-12);
        assert!((b.ratio_max.unwrap() - 20.0).abs() < 1e-12);
        assert!(BenchmarkRecord::new(None, &[], vec![], 0, 0).is_none());
        assert_eq!(BenchmarkRecord::new(None, &[1.0], vec![3], 0, 0).unwrap().ratio_mean, None);
    }
}
