//! Command-line front end: corpus simulation, tracking, evaluation, K_max
//! sweeps and corpus linting.
//!
//! Corpus layout (one directory): `corpus.json` with the simulation config,
//! then per scene `scene_NNNN.json` (frame grid), `scene_NNNN.gt.csv` and
//! `scene_NNNN.obs.csv`. Predictions are written as `scene_NNNN.pred.csv`.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::aggregate::{self, BootstrapConfig, MetricSummary};
use crate::error::{Error, Result};
use crate::evaluate::{self, EvalConfig, Metric, MetricsReport};
use crate::scenesim::{self, ObservationModel, ScenarioConfig, ScenarioMode};
use crate::seeds;
use crate::sweep::{self, SweepSpec};
use crate::trackers::{TrackerConfig, TrackerSpec};
use crate::trackmodel::{FrameGrid, ObservationSet, TrackSet};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_TREND: i32 = 3;

const STREAM_SCENE: u64 = 1;
const STREAM_OBS: u64 = 2;
const STREAM_TRACKER: u64 = 3;
const STREAM_BOOTSTRAP: u64 = 4;

pub const CORPUS_FILE: &str = "corpus.json";

#[derive(Debug, Parser)]
#[command(name = "jumptrack", version, about = "Identity-aware evaluation of sound source trackers")]
struct Cli {
    /// Worker threads (defaults to all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a scene corpus (ground truth and observations).
    Simulate {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run a tracker over every scene of a corpus.
    Track {
        #[arg(long)]
        scenes: PathBuf,
        /// Tracker spec, e.g. `{"kind": "pf", "k_max": 2}`; defaults to pf.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Score predictions against ground truth.
    Evaluate {
        #[arg(long)]
        gt: PathBuf,
        #[arg(long)]
        pred: PathBuf,
        #[arg(long)]
        gate_deg: Option<f64>,
        /// Bootstrap seed.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Simulate, track and evaluate over a grid of subsets and k_max values.
    Sweep {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        gate_deg: Option<f64>,
        #[arg(long)]
        out: PathBuf,
        /// Exit with status 3 unless the expected monotone trends hold.
        #[arg(long)]
        assert_trends: bool,
    },
    /// Check corpus invariants (jump-mode tracks are constant per segment).
    Lint {
        #[arg(long)]
        scenes: PathBuf,
    },
}

/// Contents of `corpus.json` and of `simulate --config`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulateConfig {
    pub n_scenes: usize,
    /// Template; the seed is derived per scene.
    pub scenario: ScenarioConfig,
    /// Template; the seed is derived per scene.
    pub observation: ObservationModel,
    pub seed: u64,
}

impl Default for SimulateConfig {
    fn default() -> Self {
        Self {
            n_scenes: 150,
            scenario: ScenarioConfig::default(),
            observation: ObservationModel::default(),
            seed: 0,
        }
    }
}

impl SimulateConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_scenes == 0 {
            return Err(Error::InvalidConfig("n_scenes must be ≥ 1".into()));
        }
        self.scenario.validate()?;
        self.observation.validate()
    }
}

#[derive(Debug, Serialize)]
struct EvaluateSummary<'a> {
    n_scenes: usize,
    metrics: &'a [MetricSummary],
}

/// A failure tagged with the exit status it maps to.
struct Failure {
    code: i32,
    message: String,
}

impl Failure {
    fn usage(e: impl std::fmt::Display) -> Self {
        Self {
            code: EXIT_USAGE,
            message: e.to_string(),
        }
    }

    fn data(e: impl std::fmt::Display) -> Self {
        Self {
            code: EXIT_DATA,
            message: e.to_string(),
        }
    }
}

type CmdResult = std::result::Result<(), Failure>;

/// Runs the command line (including the program name) and returns the exit
/// status.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cli.jobs {
        if n == 0 {
            eprintln!("error: --jobs must be ≥ 1");
            return EXIT_USAGE;
        }
        pool = pool.num_threads(n);
    }
    let pool = match pool.build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_USAGE;
        }
    };
    match pool.install(|| dispatch(cli.command)) {
        Ok(()) => EXIT_OK,
        Err(f) => {
            eprintln!("error: {}", f.message);
            f.code
        }
    }
}

fn dispatch(command: Command) -> CmdResult {
    match command {
        Command::Simulate { config, seed, out } => simulate(config.as_deref(), seed, &out),
        Command::Track {
            scenes,
            config,
            seed,
            out,
        } => track(&scenes, config.as_deref(), seed, &out),
        Command::Evaluate {
            gt,
            pred,
            gate_deg,
            seed,
            out,
        } => evaluate_cmd(&gt, &pred, gate_deg, seed.unwrap_or(0), &out),
        Command::Sweep {
            config,
            seed,
            gate_deg,
            out,
            assert_trends,
        } => sweep_cmd(config.as_deref(), seed, gate_deg, &out, assert_trends),
        Command::Lint { scenes } => lint(&scenes),
    }
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> std::result::Result<T, Failure> {
    let text = fs::read_to_string(path).map_err(|e| Failure::usage(Error::io(path, e)))?;
    serde_json::from_str(&text).map_err(|e| Failure::usage(format!("{}: {e}", path.display())))
}

fn load_config<T: for<'de> Deserialize<'de> + Default>(path: Option<&Path>) -> std::result::Result<T, Failure> {
    path.map_or_else(|| Ok(T::default()), read_json)
}

fn create_dir(dir: &Path) -> CmdResult {
    fs::create_dir_all(dir).map_err(|e| Failure::data(Error::io(dir, e)))
}

fn write_file(path: &Path, contents: &str) -> CmdResult {
    fs::write(path, contents).map_err(|e| Failure::data(Error::io(path, e)))
}

pub fn manifest_path(dir: &Path, scene: &str) -> PathBuf {
    dir.join(format!("{scene}.json"))
}

pub fn gt_path(dir: &Path, scene: &str) -> PathBuf {
    dir.join(format!("{scene}.gt.csv"))
}

pub fn obs_path(dir: &Path, scene: &str) -> PathBuf {
    dir.join(format!("{scene}.obs.csv"))
}

pub fn pred_path(dir: &Path, scene: &str) -> PathBuf {
    dir.join(format!("{scene}.pred.csv"))
}

/// Scene ids of a corpus, found through their `scene_*.json` manifests.
pub fn list_scenes(dir: &Path) -> Result<Vec<String>> {
    let entries = fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut ids = Vec::new();
    for entry in entries {
        let entry = entry.map_err(|e| Error::io(dir, e))?;
        let name = entry.file_name();
        let Some(name) = name.to_str() else { continue };
        if let Some(stem) = name.strip_suffix(".json") {
            if stem.starts_with("scene_") && !stem.contains('.') {
                ids.push(stem.to_owned());
            }
        }
    }
    ids.sort();
    Ok(ids)
}

fn corpus_scenes(dir: &Path) -> std::result::Result<Vec<String>, Failure> {
    let ids = list_scenes(dir).map_err(Failure::data)?;
    if ids.is_empty() {
        return Err(Failure::data(format!("{}: no scenes found", dir.display())));
    }
    Ok(ids)
}

fn scene_index(scene: &str) -> u64 {
    scene
        .strip_prefix("scene_")
        .and_then(|s| s.parse().ok())
        .unwrap_or(0)
}

/// Runs `f` on every scene in parallel and reports failures in scene order.
fn for_each_scene<T: Send, E: std::fmt::Display + Send>(
    scenes: &[String],
    f: impl Fn(&str) -> std::result::Result<T, E> + Sync,
) -> std::result::Result<Vec<T>, Failure> {
    let results: Vec<std::result::Result<T, E>> = scenes.par_iter().map(|s| f(s)).collect();
    let mut ok = Vec::with_capacity(results.len());
    let mut failed = Vec::new();
    for (scene, r) in scenes.iter().zip(results) {
        match r {
            Ok(v) => ok.push(v),
            Err(e) => {
                eprintln!("{scene}: {e}");
                failed.push(scene.as_str());
            }
        }
    }
    if failed.is_empty() {
        Ok(ok)
    } else {
        Err(Failure::data(format!(
            "{} of {} scenes failed: {}",
            failed.len(),
            scenes.len(),
            failed.join(", ")
        )))
    }
}

fn simulate(config: Option<&Path>, seed: Option<u64>, out: &Path) -> CmdResult {
    let mut cfg: SimulateConfig = load_config(config)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    cfg.validate().map_err(Failure::usage)?;
    create_dir(out)?;
    let scenes: Vec<String> = (0..cfg.n_scenes).map(sweep::scene_id).collect();
    for_each_scene(&scenes, |scene| -> Result<()> {
        let i = scene_index(scene);
        let scenario = ScenarioConfig {
            seed: seeds::derive(cfg.seed, STREAM_SCENE, i),
            ..cfg.scenario.clone()
        };
        let om = ObservationModel {
            seed: seeds::derive(cfg.seed, STREAM_OBS, i),
            ..cfg.observation.clone()
        };
        let gt = scenesim::generate_scene(&scenario)?;
        let obs = scenesim::simulate_observations(&gt, &om)?;
        gt.grid().write_manifest(&manifest_path(out, scene))?;
        gt.write_path(&gt_path(out, scene))?;
        obs.write_path(&obs_path(out, scene))
    })?;
    let text = serde_json::to_string_pretty(&cfg).map_err(Failure::data)?;
    write_file(&out.join(CORPUS_FILE), &(text + "\n"))?;
    println!("wrote {} scenes to {}", cfg.n_scenes, out.display());
    Ok(())
}

fn track(scenes_dir: &Path, config: Option<&Path>, seed: Option<u64>, out: &Path) -> CmdResult {
    let spec: TrackerSpec = match config {
        Some(path) => read_json(path)?,
        None => TrackerSpec::Pf(TrackerConfig::default()),
    };
    if let TrackerSpec::Pf(cfg) = &spec {
        cfg.validate().map_err(Failure::usage)?;
    }
    let scenes = corpus_scenes(scenes_dir)?;
    create_dir(out)?;
    let counts = for_each_scene(&scenes, |scene| -> Result<usize> {
        let grid = FrameGrid::read_manifest(&manifest_path(scenes_dir, scene))?;
        let spec = match &spec {
            TrackerSpec::Pf(cfg) => TrackerSpec::Pf(TrackerConfig {
                seed: seeds::derive(seed.unwrap_or(cfg.seed), STREAM_TRACKER, scene_index(scene)),
                ..cfg.clone()
            }),
            other => other.clone(),
        };
        let pred = if spec.needs_ground_truth() {
            let gt = TrackSet::read_path(grid, &gt_path(scenes_dir, scene))?;
            spec.run(None, Some(&gt))?
        } else {
            let obs = ObservationSet::read_path(grid, &obs_path(scenes_dir, scene))?;
            spec.run(Some(&obs), None)?
        };
        pred.write_path(&pred_path(out, scene))?;
        Ok(pred.n_tracks())
    })?;
    println!(
        "tracked {} scenes ({} predicted tracks) into {}",
        scenes.len(),
        counts.iter().sum::<usize>(),
        out.display()
    );
    Ok(())
}

fn evaluate_cmd(gt_dir: &Path, pred_dir: &Path, gate_deg: Option<f64>, seed: u64, out: &Path) -> CmdResult {
    let mut cfg = EvalConfig::default();
    if let Some(g) = gate_deg {
        if !(g > 0.0 && g <= 180.0) {
            return Err(Failure::usage("--gate-deg must lie in (0, 180]"));
        }
        cfg.gate_deg = g;
    }
    let scenes = corpus_scenes(gt_dir)?;
    let reports = for_each_scene(&scenes, |scene| -> Result<MetricsReport> {
        let grid = FrameGrid::read_manifest(&manifest_path(gt_dir, scene))?;
        let gt = TrackSet::read_path(grid, &gt_path(gt_dir, scene))?;
        let pred = TrackSet::read_path(grid, &pred_path(pred_dir, scene))?;
        evaluate::evaluate(&pred, &gt, &cfg)
    })?;
    create_dir(out)?;

    let mut table = format!("{}\n", evaluate::SCENE_CSV_HEADER);
    for (scene, r) in scenes.iter().zip(&reports) {
        table.push_str(&evaluate::scene_csv_row(scene, r));
        table.push('\n');
    }
    write_file(&out.join("metrics.csv"), &table)?;

    let summaries = summarize_all(&reports, seed).map_err(Failure::data)?;
    let json = serde_json::to_string_pretty(&EvaluateSummary {
        n_scenes: reports.len(),
        metrics: &summaries,
    })
    .map_err(Failure::data)?;
    write_file(&out.join("aggregate.json"), &(json + "\n"))?;

    for s in &summaries {
        let fmt = |v: Option<f64>| v.map_or_else(|| "-".to_owned(), |x| format!("{x:.4}"));
        println!("{:<20} {:>10} ± {}", s.metric, fmt(s.mean), fmt(s.std));
    }
    Ok(())
}

fn summarize_all(reports: &[MetricsReport], seed: u64) -> Result<Vec<MetricSummary>> {
    let refs: Vec<&MetricsReport> = reports.iter().collect();
    Metric::ALL
        .iter()
        .enumerate()
        .map(|(i, &m)| {
            let mut rng = ChaCha8Rng::seed_from_u64(seeds::derive(seed, STREAM_BOOTSTRAP, i as u64));
            aggregate::summarize(&refs, m, &BootstrapConfig::default(), &mut rng)
        })
        .collect()
}

fn sweep_cmd(
    config: Option<&Path>,
    seed: Option<u64>,
    gate_deg: Option<f64>,
    out: &Path,
    assert_trends: bool,
) -> CmdResult {
    let mut spec: SweepSpec = load_config(config)?;
    if let Some(s) = seed {
        spec.master_seed = s;
    }
    if let Some(g) = gate_deg {
        spec.eval.gate_deg = g;
    }
    spec.validate().map_err(Failure::usage)?;
    spec.scenario.validate().map_err(Failure::usage)?;
    spec.observation.validate().map_err(Failure::usage)?;

    let result = sweep::run_sweep(&spec).map_err(Failure::data)?;
    create_dir(out)?;
    write_file(&out.join("per_scene.csv"), &sweep::per_scene_csv(&result.per_scene))?;
    write_file(&out.join("aggregate.csv"), &sweep::aggregate_csv(&result.aggregate))?;
    let json = serde_json::to_string_pretty(&result.aggregate).map_err(Failure::data)?;
    write_file(&out.join("aggregate.json"), &(json + "\n"))?;
    println!(
        "{} scene evaluations, {} aggregate rows in {}",
        result.per_scene.len(),
        result.aggregate.len(),
        out.display()
    );

    if assert_trends {
        let violations = sweep::check_sweep_trends(&result.aggregate);
        if !violations.is_empty() {
            for v in &violations {
                eprintln!("trend violated: {v}");
            }
            return Err(Failure {
                code: EXIT_TREND,
                message: format!("{} trend check(s) failed", violations.len()),
            });
        }
        println!("all trend checks passed");
    }
    Ok(())
}

/// A jump/static-mode track must keep one direction over each run of
/// consecutive active frames. Returns the offending (track, frame) pairs.
pub fn lint_piecewise_constant(ts: &TrackSet) -> Vec<(String, usize)> {
    let mut bad = Vec::new();
    for (id, track) in ts.tracks() {
        let mut prev: Option<(usize, _)> = None;
        for (&f, d) in track {
            if let Some((pf, pd)) = prev {
                if pf + 1 == f && pd != *d {
                    bad.push((id.to_owned(), f));
                }
            }
            prev = Some((f, *d));
        }
    }
    bad
}

fn lint(dir: &Path) -> CmdResult {
    let corpus_file = dir.join(CORPUS_FILE);
    let text = fs::read_to_string(&corpus_file).map_err(|e| Failure::data(Error::io(&corpus_file, e)))?;
    let cfg: SimulateConfig =
        serde_json::from_str(&text).map_err(|e| Failure::data(format!("{}: {e}", corpus_file.display())))?;
    let scenes = corpus_scenes(dir)?;
    let piecewise = matches!(cfg.scenario.mode, ScenarioMode::Jump | ScenarioMode::Static);
    let expected_tracks = cfg.scenario.n_speakers;
    for_each_scene(&scenes, |scene| -> std::result::Result<(), String> {
        let load = || -> Result<TrackSet> {
            let grid = FrameGrid::read_manifest(&manifest_path(dir, scene))?;
            ObservationSet::read_path(grid, &obs_path(dir, scene))?;
            TrackSet::read_path(grid, &gt_path(dir, scene))
        };
        let gt = load().map_err(|e| e.to_string())?;
        if gt.n_tracks() != expected_tracks {
            return Err(format!("{} tracks, corpus declares {expected_tracks}", gt.n_tracks()));
        }
        if piecewise {
            if let Some((id, f)) = lint_piecewise_constant(&gt).first() {
                return Err(format!("track {id:?} moves while active at frame {f}"));
            }
        }
        Ok(())
    })?;
    println!("{} scenes ok", scenes.len());
    Ok(())
}
