//! Subsampling bootstrap over per-scene metric values.

use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evaluate::{Metric, MetricsReport};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BootstrapConfig {
    /// Fraction of scenes drawn (without replacement) per replicate.
    pub fraction: f64,
    pub replicates: usize,
}

impl Default for BootstrapConfig {
    fn default() -> Self {
        Self {
            fraction: 0.8,
            replicates: 100,
        }
    }
}

/// Mean of replicate means and their standard deviation. Each replicate
/// averages `⌈fraction·n⌉` values drawn without replacement. With zero
/// replicates the plain mean is returned and the std is `None`.
pub fn bootstrap_aggregate<R: Rng + ?Sized>(
    values: &[f64],
    fraction: f64,
    replicates: usize,
    rng: &mut R,
) -> Result<(f64, Option<f64>)> {
    let n = values.len();
    if n < 2 {
        return Err(Error::InsufficientData(n));
    }
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::InvalidConfig(format!("bootstrap fraction {fraction} outside (0, 1]")));
    }
    if replicates == 0 {
        return Ok((mean(values), None));
    }
    let take = ((fraction * n as f64).ceil() as usize).clamp(1, n);
    let means: Vec<f64> = (0..replicates)
        .map(|_| {
            let idx = index::sample(rng, n, take);
            idx.iter().map(|i| values[i]).sum::<f64>() / take as f64
        })
        .collect();
    let m = mean(&means);
    let var = means.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / replicates as f64;
    Ok((m, Some(var.sqrt())))
}

fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricSummary {
    pub metric: &'static str,
    pub mean: Option<f64>,
    pub std: Option<f64>,
    pub n_defined: usize,
    /// Scenes where the metric was undefined and left out.
    pub n_excluded: usize,
}

/// Summarizes one metric over scenes. A single defined value is reported as
/// its own mean without std; no defined value gives no mean.
pub fn summarize<R: Rng + ?Sized>(
    reports: &[&MetricsReport],
    metric: Metric,
    cfg: &BootstrapConfig,
    rng: &mut R,
) -> Result<MetricSummary> {
    let values: Vec<f64> = reports.iter().filter_map(|r| r.metric(metric)).collect();
    let n_defined = values.len();
    let (mean_v, std) = match n_defined {
        0 => (None, None),
        1 => (Some(values[0]), None),
        _ => {
            let (m, s) = bootstrap_aggregate(&values, cfg.fraction, cfg.replicates, rng)?;
            (Some(m), s)
        }
    };
    Ok(MetricSummary {
        metric: metric.name(),
        mean: mean_v,
        std,
        n_defined,
        n_excluded: reports.len() - n_defined,
    })
}
