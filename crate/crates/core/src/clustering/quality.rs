use serde::{Deserialize, Serialize};

use super::ClusterAssignment;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QualityThresholds {
    pub noise: f64,
    pub dominance: f64,
}

impl Default for QualityThresholds {
    fn default() -> Self {
        Self {
            noise: 0.30,
            dominance: 0.30,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QualityFlag {
    ExcessNoise,
    DominantCluster,
}

/// Red-flag summary of a clustering result. Fractions are over all points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QualityReport {
    pub noise_fraction: f64,
    pub largest_cluster_fraction: f64,
    pub cluster_count: usize,
    pub flags: Vec<QualityFlag>,
}

/// Flags are raised on strict excess over the thresholds.
pub fn quality_report(assignment: &ClusterAssignment, thresholds: &QualityThresholds) -> QualityReport {
    quality_from_labels(&assignment.labels, thresholds)
}

pub(crate) fn quality_from_labels(labels: &[i64], thresholds: &QualityThresholds) -> QualityReport {
    let n = labels.len();
    let mut counts = std::collections::BTreeMap::<i64, usize>::new();
    for &l in labels {
        *counts.entry(l).or_default() += 1;
    }
    let noise = counts.remove(&-1).unwrap_or(0);
    let largest = counts.values().copied().max().unwrap_or(0);
    let frac = |k: usize| if n == 0 { 0.0 } else { k as f64 / n as f64 };
    let noise_fraction = frac(noise);
    let largest_cluster_fraction = frac(largest);
    let mut flags = Vec::new();
    if noise_fraction > thresholds.noise {
        flags.push(QualityFlag::ExcessNoise);
    }
    if largest_cluster_fraction > thresholds.dominance {
        flags.push(QualityFlag::DominantCluster);
    }
    QualityReport {
        noise_fraction,
        largest_cluster_fraction,
        cluster_count: counts.len(),
        flags,
    }
}
