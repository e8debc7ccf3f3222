//! K_max sweeps: simulate subsets of scenes, run the particle-filter tracker
//! under several id budgets, evaluate, and aggregate with the bootstrap.

use std::fmt;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::aggregate::{self, BootstrapConfig, MetricSummary};
use crate::error::{Error, Result};
use crate::evaluate::{self, EvalConfig, Metric, MetricsReport};
use crate::scenesim::{self, ObservationModel, ScenarioConfig};
use crate::seeds;
use crate::trackers::{self, TrackerConfig};

const STREAM_SCENE: u64 = 1;
const STREAM_OBS: u64 = 2;
const STREAM_TRACKER: u64 = 3;
const STREAM_BOOTSTRAP: u64 = 4;

/// An id budget, either absolute or relative to the subset's speaker count.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KMaxSpec {
    /// `factor · J`
    TimesJ(usize),
    Fixed(usize),
    Unbounded,
}

impl KMaxSpec {
    pub fn resolve(self, n_speakers: usize) -> Option<usize> {
        match self {
            KMaxSpec::TimesJ(m) => Some(m * n_speakers),
            KMaxSpec::Fixed(k) => Some(k),
            KMaxSpec::Unbounded => None,
        }
    }

    /// Sort key: bounded budgets ascending, unbounded last.
    pub fn rank(self, n_speakers: usize) -> usize {
        self.resolve(n_speakers).unwrap_or(usize::MAX)
    }
}

impl fmt::Display for KMaxSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            KMaxSpec::TimesJ(1) => write!(f, "J"),
            KMaxSpec::TimesJ(m) => write!(f, "{m}J"),
            KMaxSpec::Fixed(k) => write!(f, "{k}"),
            KMaxSpec::Unbounded => write!(f, "inf"),
        }
    }
}

impl std::str::FromStr for KMaxSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let bad = || Error::InvalidConfig(format!("bad k_max {s:?}"));
        match s {
            "inf" | "unbounded" | "∞" => Ok(KMaxSpec::Unbounded),
            _ if s.ends_with('J') => {
                let m = &s[..s.len() - 1];
                let m = if m.is_empty() { 1 } else { m.parse().map_err(|_| bad())? };
                if m == 0 {
                    return Err(bad());
                }
                Ok(KMaxSpec::TimesJ(m))
            }
            _ => s.parse().map(KMaxSpec::Fixed).map_err(|_| bad()),
        }
    }
}

impl Serialize for KMaxSpec {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for KMaxSpec {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(usize),
            Text(String),
            Null(()),
        }
        match Raw::deserialize(d)? {
            Raw::Num(k) => Ok(KMaxSpec::Fixed(k)),
            Raw::Text(s) => s.parse().map_err(serde::de::Error::custom),
            Raw::Null(()) => Ok(KMaxSpec::Unbounded),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SubsetSpec {
    pub n_speakers: usize,
    pub n_scenes: usize,
}

impl Default for SubsetSpec {
    fn default() -> Self {
        Self {
            n_speakers: 1,
            n_scenes: 150,
        }
    }
}

impl SubsetSpec {
    pub fn label(&self) -> String {
        format!("{}spk", self.n_speakers)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSpec {
    pub subsets: Vec<SubsetSpec>,
    pub k_max: Vec<KMaxSpec>,
    /// Template; `n_speakers` and `seed` are set per scene.
    pub scenario: ScenarioConfig,
    /// Template; `k_max`, `max_active` and `seed` are set per run.
    pub tracker: TrackerConfig,
    /// Cap on simultaneously live tracks; `None` ties it to J.
    pub max_active: Option<usize>,
    /// Template; `seed` is set per scene.
    pub observation: ObservationModel,
    pub eval: EvalConfig,
    pub bootstrap: BootstrapConfig,
    pub master_seed: u64,
}

impl Default for SweepSpec {
    fn default() -> Self {
        Self {
            subsets: (1..=3)
                .map(|j| SubsetSpec {
                    n_speakers: j,
                    n_scenes: 150,
                })
                .collect(),
            k_max: vec![
                KMaxSpec::TimesJ(1),
                KMaxSpec::TimesJ(2),
                KMaxSpec::TimesJ(4),
                KMaxSpec::Unbounded,
            ],
            scenario: ScenarioConfig::default(),
            tracker: TrackerConfig::default(),
            max_active: None,
            observation: ObservationModel::default(),
            eval: EvalConfig::default(),
            bootstrap: BootstrapConfig::default(),
            master_seed: 0,
        }
    }
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        if self.subsets.is_empty() || self.k_max.is_empty() {
            return Err(Error::InvalidConfig("sweep needs subsets and k_max values".into()));
        }
        for s in &self.subsets {
            if s.n_scenes == 0 || s.n_speakers == 0 {
                return Err(Error::InvalidConfig(format!(
                    "subset {} needs n_scenes ≥ 1 and n_speakers ≥ 1",
                    s.label()
                )));
            }
            let active = self.max_active.unwrap_or(s.n_speakers);
            for k in &self.k_max {
                if k.resolve(s.n_speakers).is_some_and(|k| k < active) {
                    return Err(Error::InvalidConfig(format!(
                        "k_max {k} is below max_active {active} for subset {}",
                        s.label()
                    )));
                }
            }
        }
        Ok(())
    }

    /// Scenario for scene `index` of subset `subset_idx`.
    pub fn scene_config(&self, subset_idx: usize, index: usize) -> ScenarioConfig {
        ScenarioConfig {
            n_speakers: self.subsets[subset_idx].n_speakers,
            seed: seeds::derive(self.master_seed, STREAM_SCENE, scene_key(subset_idx, index)),
            ..self.scenario.clone()
        }
    }

    pub fn observation_model(&self, subset_idx: usize, index: usize) -> ObservationModel {
        ObservationModel {
            seed: seeds::derive(self.master_seed, STREAM_OBS, scene_key(subset_idx, index)),
            ..self.observation.clone()
        }
    }

    pub fn tracker_config(&self, subset_idx: usize, index: usize, k_max: KMaxSpec) -> TrackerConfig {
        let j = self.subsets[subset_idx].n_speakers;
        TrackerConfig {
            k_max: k_max.resolve(j),
            max_active: self.max_active.unwrap_or(j),
            seed: seeds::derive(self.master_seed, STREAM_TRACKER, scene_key(subset_idx, index)),
            ..self.tracker.clone()
        }
    }
}

fn scene_key(subset_idx: usize, index: usize) -> u64 {
    ((subset_idx as u64) << 32) | index as u64
}

pub fn scene_id(index: usize) -> String {
    format!("scene_{index:04}")
}

#[derive(Debug, Clone)]
pub struct SceneRecord {
    pub subset: String,
    pub k_max: KMaxSpec,
    pub scene_id: String,
    pub report: MetricsReport,
}

#[derive(Debug, Clone, Serialize)]
pub struct AggregateRow {
    pub subset: String,
    pub n_speakers: usize,
    pub k_max: KMaxSpec,
    #[serde(flatten)]
    pub summary: MetricSummary,
}

#[derive(Debug, Clone)]
pub struct SweepResult {
    pub per_scene: Vec<SceneRecord>,
    pub aggregate: Vec<AggregateRow>,
}

/// Runs the whole sweep. Scenes run in parallel on the current rayon pool;
/// results are ordered by (subset, k_max, scene), independent of scheduling.
pub fn run_sweep(spec: &SweepSpec) -> Result<SweepResult> {
    spec.validate()?;
    let mut per_scene = Vec::new();
    let mut aggregate = Vec::new();

    for (si, subset) in spec.subsets.iter().enumerate() {
        let mut k_values = spec.k_max.clone();
        k_values.sort_by_key(|k| k.rank(subset.n_speakers));
        k_values.dedup_by_key(|k| k.rank(subset.n_speakers));

        let scenes: Vec<Vec<MetricsReport>> = (0..subset.n_scenes)
            .into_par_iter()
            .map(|i| -> Result<Vec<MetricsReport>> {
                let gt = scenesim::generate_scene(&spec.scene_config(si, i))?;
                let obs = scenesim::simulate_observations(&gt, &spec.observation_model(si, i))?;
                k_values
                    .iter()
                    .map(|&k| {
                        let pred = trackers::pf_tracker(&obs, &spec.tracker_config(si, i, k))?;
                        evaluate::evaluate(&pred, &gt, &spec.eval)
                    })
                    .collect()
            })
            .collect::<Result<_>>()?;

        for (ki, &k) in k_values.iter().enumerate() {
            let reports: Vec<&MetricsReport> = scenes.iter().map(|r| &r[ki]).collect();
            for (mi, &metric) in Metric::ALL.iter().enumerate() {
                let key = scene_key(si, (ki << 8) | mi);
                let mut rng = ChaCha8Rng::seed_from_u64(seeds::derive(spec.master_seed, STREAM_BOOTSTRAP, key));
                aggregate.push(AggregateRow {
                    subset: subset.label(),
                    n_speakers: subset.n_speakers,
                    k_max: k,
                    summary: aggregate::summarize(&reports, metric, &spec.bootstrap, &mut rng)?,
                });
            }
            per_scene.extend(reports.into_iter().enumerate().map(|(i, r)| SceneRecord {
                subset: subset.label(),
                k_max: k,
                scene_id: scene_id(i),
                report: r.clone(),
            }));
        }
    }
    Ok(SweepResult {
        per_scene,
        aggregate,
    })
}

/// Long-format aggregate table: one row per (subset, k_max, metric).
pub fn aggregate_csv(rows: &[AggregateRow]) -> String {
    let mut out = String::from("subset,k_max,metric,mean,std,n_defined,n_excluded\n");
    let opt = |v: Option<f64>| v.map(|x| format!("{x:.6}")).unwrap_or_default();
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            r.subset,
            r.k_max,
            r.summary.metric,
            opt(r.summary.mean),
            opt(r.summary.std),
            r.summary.n_defined,
            r.summary.n_excluded
        ));
    }
    out
}

pub fn per_scene_csv(records: &[SceneRecord]) -> String {
    let mut out = format!("subset,k_max,{}\n", evaluate::SCENE_CSV_HEADER);
    for r in records {
        out.push_str(&format!(
            "{},{},{}\n",
            r.subset,
            r.k_max,
            evaluate::scene_csv_row(&r.scene_id, &r.report)
        ));
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Trend {
    NonIncreasing,
    NonDecreasing,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrendViolation {
    pub subset: String,
    pub metric: &'static str,
    pub detail: String,
}

impl fmt::Display for TrendViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {}: {}", self.subset, self.metric, self.detail)
    }
}

/// Checks a monotone trend over ordered (mean, std) points: the endpoints must
/// be strictly ordered and no adjacent pair may invert by more than the larger
/// of the two bootstrap stds.
pub fn check_trend(points: &[(f64, f64)], trend: Trend) -> std::result::Result<(), String> {
    let sign = match trend {
        Trend::NonIncreasing => -1.0,
        Trend::NonDecreasing => 1.0,
    };
    let (Some(first), Some(last)) = (points.first(), points.last()) else {
        return Err("no points".into());
    };
    if points.len() < 2 || sign * (last.0 - first.0) <= 0.0 {
        return Err(format!("endpoints not strictly ordered: {:.4} → {:.4}", first.0, last.0));
    }
    for (i, w) in points.windows(2).enumerate() {
        let inversion = -sign * (w[1].0 - w[0].0);
        let margin = w[0].1.max(w[1].1);
        if inversion > margin {
            return Err(format!(
                "inversion {:.4} > margin {:.4} between points {} and {}",
                inversion,
                margin,
                i,
                i + 1
            ));
        }
    }
    Ok(())
}

/// Trend checks over a sweep: AssRe non-increasing and TSR non-decreasing in
/// k_max for every subset, AssPr non-decreasing for multi-speaker subsets
/// (a single ground truth cannot be merged).
pub fn check_sweep_trends(rows: &[AggregateRow]) -> Vec<TrendViolation> {
    let mut subsets: Vec<(String, usize)> = rows.iter().map(|r| (r.subset.clone(), r.n_speakers)).collect();
    subsets.dedup();
    let mut out = Vec::new();
    for (subset, j) in subsets {
        let mut checks = vec![(Metric::AssRe, Trend::NonIncreasing), (Metric::Tsr, Trend::NonDecreasing)];
        if j >= 2 {
            checks.push((Metric::AssPr, Trend::NonDecreasing));
        }
        for (metric, trend) in checks {
            let points: Vec<(f64, f64)> = rows
                .iter()
                .filter(|r| r.subset == subset && r.summary.metric == metric.name())
                .filter_map(|r| Some((r.summary.mean?, r.summary.std.unwrap_or(0.0))))
                .collect();
            if let Err(detail) = check_trend(&points, trend) {
                out.push(TrendViolation {
                    subset: subset.clone(),
                    metric: metric.name(),
                    detail,
                });
            }
        }
    }
    out
}
