//! Seeded ground-truth scenes and noisy DoA observations.
//!
//! Speakers alternate speech segments and silences. In `jump` mode each
//! segment sits still at one of the speaker's candidate positions and the
//! speaker moves only while silent, which produces discontinuous tracks.
//! `static`, `moving` and `moving_zeroed` cover the continuous cases and the
//! moving-with-deleted-activity variant.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{self, Direction, UnitVector};
use crate::seeds;
use crate::trackmodel::{FrameGrid, Observation, ObservationSet, TrackSet};

const SEPARATION_ATTEMPTS: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioMode {
    Jump,
    Static,
    Moving,
    MovingZeroed,
}

/// Scene generation parameters. Angles in degrees, times in seconds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub n_speakers: usize,
    pub n_positions: usize,
    pub min_separation_deg: f64,
    pub duration_s: f64,
    pub frame_period_s: f64,
    /// Speech segment length bounds (uniform).
    pub segment_len_s: (f64, f64),
    /// Silence length bounds between segments (uniform).
    pub gap_len_s: (f64, f64),
    /// Length bounds of the deleted windows in `moving_zeroed` mode.
    pub zeroed_window_s: (f64, f64),
    /// Angular speed along the great circle in the moving modes.
    pub angular_speed_deg_s: f64,
    /// Whether a jump must land on a position other than the current one.
    pub exclude_previous: bool,
    pub mode: ScenarioMode,
    pub seed: u64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            n_speakers: 1,
            n_positions: 6,
            min_separation_deg: 60.0,
            duration_s: 60.0,
            frame_period_s: 0.1,
            segment_len_s: (1.0, 6.0),
            gap_len_s: (0.1, 1.0),
            zeroed_window_s: (1.5, 4.0),
            angular_speed_deg_s: 3.0,
            exclude_previous: true,
            mode: ScenarioMode::Jump,
            seed: 0,
        }
    }
}

impl ScenarioConfig {
    pub fn grid(&self) -> Result<FrameGrid> {
        let n = (self.duration_s / self.frame_period_s).round();
        if !(n >= 1.0 && n.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "duration {} s with frame period {} s yields no frames",
                self.duration_s, self.frame_period_s
            )));
        }
        FrameGrid::new(self.frame_period_s, n as usize)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.n_speakers == 0 {
            return bad("n_speakers must be ≥ 1".into());
        }
        if !(self.duration_s > 0.0) {
            return bad("duration_s must be > 0".into());
        }
        self.grid()?;
        let bounds_ok = |(lo, hi): (f64, f64)| lo > 0.0 && lo <= hi && hi.is_finite();
        if !bounds_ok(self.segment_len_s) {
            return bad(format!("segment_len_s {:?} invalid", self.segment_len_s));
        }
        if !bounds_ok(self.gap_len_s) || self.gap_len_s.1 > self.duration_s {
            return bad(format!("gap_len_s {:?} invalid", self.gap_len_s));
        }
        if self.mode == ScenarioMode::MovingZeroed
            && (!bounds_ok(self.zeroed_window_s) || self.zeroed_window_s.1 > self.duration_s)
        {
            return bad(format!("zeroed_window_s {:?} invalid", self.zeroed_window_s));
        }
        if matches!(self.mode, ScenarioMode::Jump | ScenarioMode::Static) {
            if self.n_positions == 0 || (self.mode == ScenarioMode::Jump && self.n_positions < 2) {
                return bad(format!("n_positions {} too small", self.n_positions));
            }
            if !(self.min_separation_deg > 0.0 && self.min_separation_deg <= 180.0) {
                return bad(format!("min_separation_deg {} outside (0, 180]", self.min_separation_deg));
            }
        }
        if !self.angular_speed_deg_s.is_finite() || self.angular_speed_deg_s < 0.0 {
            return bad("angular_speed_deg_s must be ≥ 0".into());
        }
        Ok(())
    }
}

/// Half-open frame range `[start, end)` of activity, with the candidate
/// position index used for it (jump and static modes).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Segment {
    pub start: usize,
    pub end: usize,
    pub position: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpeakerPlan {
    pub id: String,
    /// Candidate positions (jump/static modes; empty for moving modes).
    pub candidates: Vec<Direction>,
    pub segments: Vec<Segment>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    pub tracks: TrackSet,
    pub speakers: Vec<SpeakerPlan>,
}

pub fn speaker_id(index: usize) -> String {
    format!("spk{index}")
}

pub fn generate_scene(cfg: &ScenarioConfig) -> Result<TrackSet> {
    generate_scene_detailed(cfg).map(|s| s.tracks)
}

pub fn generate_scene_detailed(cfg: &ScenarioConfig) -> Result<Scene> {
    cfg.validate()?;
    let grid = cfg.grid()?;
    let mut tracks = TrackSet::new(grid);
    let mut speakers = Vec::with_capacity(cfg.n_speakers);

    for j in 0..cfg.n_speakers {
        let mut rng = ChaCha8Rng::seed_from_u64(seeds::derive(cfg.seed, 0x5ce7e, j as u64));
        let id = speaker_id(j);
        let plan = match cfg.mode {
            ScenarioMode::Jump | ScenarioMode::Static => {
                let candidates = geometry::sample_separated_set(
                    cfg.n_positions,
                    cfg.min_separation_deg.to_radians(),
                    &mut rng,
                    SEPARATION_ATTEMPTS,
                )?;
                let spans = schedule(grid, cfg.segment_len_s, cfg.gap_len_s, &mut rng);
                let segments = assign_positions(cfg, &spans, &mut rng);
                for seg in &segments {
                    let dir = candidates[seg.position.expect("positioned segment")];
                    for f in seg.start..seg.end {
                        tracks.insert(&id, f, dir)?;
                    }
                }
                SpeakerPlan {
                    id,
                    candidates,
                    segments,
                }
            }
            ScenarioMode::Moving | ScenarioMode::MovingZeroed => {
                let path = great_circle(cfg, grid, &mut rng);
                let segments = if cfg.mode == ScenarioMode::Moving {
                    vec![Segment {
                        start: 0,
                        end: grid.n_frames,
                        position: None,
                    }]
                } else {
                    schedule(grid, cfg.segment_len_s, cfg.zeroed_window_s, &mut rng)
                        .into_iter()
                        .map(|(start, end)| Segment {
                            start,
                            end,
                            position: None,
                        })
                        .collect()
                };
                for seg in &segments {
                    for f in seg.start..seg.end {
                        tracks.insert(&id, f, path[f])?;
                    }
                }
                SpeakerPlan {
                    id,
                    candidates: Vec::new(),
                    segments,
                }
            }
        };
        speakers.push(plan);
    }
    Ok(Scene { tracks, speakers })
}

fn frames_for(len_s: f64, period: f64) -> usize {
    // tolerate representation error in e.g. 1.1 / 0.1
    ((len_s / period - 1e-9).ceil() as usize).max(1)
}

/// Alternating active runs and silences tiling the grid, starting with an
/// active run. The last run is truncated at the end of the scene.
fn schedule<R: Rng>(
    grid: FrameGrid,
    active_s: (f64, f64),
    silent_s: (f64, f64),
    rng: &mut R,
) -> Vec<(usize, usize)> {
    let n = grid.n_frames;
    let mut spans = Vec::new();
    let mut t = 0usize;
    while t < n {
        let len = frames_for(rng.random_range(active_s.0..=active_s.1), grid.frame_period);
        let end = (t + len).min(n);
        spans.push((t, end));
        t = end + frames_for(rng.random_range(silent_s.0..=silent_s.1), grid.frame_period);
    }
    spans
}

fn assign_positions<R: Rng>(
    cfg: &ScenarioConfig,
    spans: &[(usize, usize)],
    rng: &mut R,
) -> Vec<Segment> {
    let n_pos = cfg.n_positions;
    let mut current: Option<usize> = None;
    spans
        .iter()
        .map(|&(start, end)| {
            let pos = match (cfg.mode, current) {
                (ScenarioMode::Static, _) => 0,
                (_, Some(prev)) if cfg.exclude_previous => {
                    let k = rng.random_range(0..n_pos - 1);
                    if k >= prev {
                        k + 1
                    } else {
                        k
                    }
                }
                _ => rng.random_range(0..n_pos),
            };
            current = Some(pos);
            Segment {
                start,
                end,
                position: Some(pos),
            }
        })
        .collect()
}

fn great_circle<R: Rng>(cfg: &ScenarioConfig, grid: FrameGrid, rng: &mut R) -> Vec<Direction> {
    let start = geometry::sample_unit(rng);
    let axis = loop {
        let other = geometry::sample_unit(rng);
        if let Some(a) = UnitVector::normalize(geometry::cross(start.0, other.0)) {
            break a;
        }
    };
    let step = cfg.angular_speed_deg_s.to_radians() * grid.frame_period;
    (0..grid.n_frames)
        .map(|f| Direction::from_unit(start.rotated(&axis, step * f as f64)))
        .collect()
}

/// Stand-in for a neural localizer: perturbed true directions, misses and
/// uniform clutter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ObservationModel {
    pub angular_noise_sigma_deg: f64,
    pub p_miss: f64,
    /// Expected clutter directions per frame.
    pub clutter_rate: f64,
    pub seed: u64,
}

impl Default for ObservationModel {
    fn default() -> Self {
        Self {
            angular_noise_sigma_deg: 3.0,
            p_miss: 0.05,
            clutter_rate: 0.02,
            seed: 0,
        }
    }
}

impl ObservationModel {
    pub fn noiseless() -> Self {
        Self {
            angular_noise_sigma_deg: 0.0,
            p_miss: 0.0,
            clutter_rate: 0.0,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.angular_noise_sigma_deg >= 0.0 && self.angular_noise_sigma_deg.is_finite()) {
            return Err(Error::InvalidConfig("angular_noise_sigma_deg must be ≥ 0".into()));
        }
        if !(0.0..=1.0).contains(&self.p_miss) {
            return Err(Error::InvalidConfig("p_miss must lie in [0, 1]".into()));
        }
        if !(self.clutter_rate >= 0.0 && self.clutter_rate.is_finite()) {
            return Err(Error::InvalidConfig("clutter_rate must be ≥ 0".into()));
        }
        Ok(())
    }
}

pub fn simulate_observations(gt: &TrackSet, om: &ObservationModel) -> Result<ObservationSet> {
    om.validate()?;
    let grid = gt.grid();
    let mut rng = ChaCha8Rng::seed_from_u64(om.seed);
    let sigma = om.angular_noise_sigma_deg.to_radians();
    let clutter = (om.clutter_rate > 0.0)
        .then(|| Poisson::new(om.clutter_rate).expect("positive finite rate"));
    let mut out = ObservationSet::new(grid, true);

    for (f, entries) in gt.frames().into_iter().enumerate() {
        for (id, dir) in entries {
            if rng.random::<f64>() < om.p_miss {
                continue;
            }
            let noisy = geometry::perturb(&dir.to_unit(), sigma, &mut rng);
            let direction = if sigma > 0.0 {
                Direction::from_unit(noisy)
            } else {
                dir
            };
            out.push(
                f,
                Observation {
                    direction,
                    source_id: Some(id.to_owned()),
                },
            )?;
        }
        if let Some(pois) = &clutter {
            let k = pois.sample(&mut rng) as usize;
            for _ in 0..k {
                out.push(
                    f,
                    Observation {
                        direction: geometry::sample_direction(&mut rng),
                        source_id: None,
                    },
                )?;
            }
        }
    }
    Ok(out)
}
