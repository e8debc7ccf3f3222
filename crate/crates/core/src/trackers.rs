//! Trackers turning observations (or, for the white-box adversaries, ground
//! truth) into predicted track sets.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{self, Direction, UnitVector};
use crate::trackmodel::{ObservationSet, TrackSet};

/// Particle-filter tracker parameters. Angles in degrees.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrackerConfig {
    /// Upper bound on distinct ids ever issued; `None` is unbounded.
    pub k_max: Option<usize>,
    /// Maximum simultaneously live tracks.
    pub max_active: usize,
    pub assoc_gate_deg: f64,
    pub birth_frames: usize,
    pub death_frames: usize,
    /// A live track keeps reporting its predicted direction for up to this
    /// many consecutive unassociated frames.
    pub report_hold_frames: usize,
    pub n_particles: usize,
    /// Random-walk step per frame.
    pub process_noise_deg: f64,
    /// Observation noise assumed by the likelihood, κ = 1/σ².
    pub obs_sigma_deg: f64,
    pub seed: u64,
}

impl Default for TrackerConfig {
    fn default() -> Self {
        Self {
            k_max: None,
            max_active: 1,
            assoc_gate_deg: 15.0,
            birth_frames: 3,
            death_frames: 10,
            report_hold_frames: 1,
            n_particles: 100,
            process_noise_deg: 0.5,
            obs_sigma_deg: 3.0,
            seed: 0,
        }
    }
}

impl TrackerConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.to_owned()));
        if self.birth_frames == 0 || self.death_frames == 0 {
            return bad("birth_frames and death_frames must be ≥ 1");
        }
        if self.max_active == 0 {
            return bad("max_active must be ≥ 1");
        }
        if let Some(k) = self.k_max {
            if k < self.max_active {
                return bad("k_max must be ≥ max_active");
            }
        }
        if self.n_particles == 0 {
            return bad("n_particles must be ≥ 1");
        }
        if !(self.assoc_gate_deg > 0.0 && self.assoc_gate_deg <= 180.0) {
            return bad("assoc_gate_deg must lie in (0, 180]");
        }
        if !(self.process_noise_deg >= 0.0 && self.obs_sigma_deg >= 0.0) {
            return bad("noise parameters must be ≥ 0");
        }
        Ok(())
    }
}

/// Groups tagged observations by source; clutter is dropped.
pub fn oracle_tracker(obs: &ObservationSet) -> Result<TrackSet> {
    if !obs.is_tagged() {
        return Err(Error::MissingTags);
    }
    let mut out = TrackSet::new(obs.grid());
    for (f, frame) in obs.frames().iter().enumerate() {
        for o in frame {
            if let Some(src) = &o.source_id {
                let id = oracle_id(src);
                if out.get(&id, f).is_none() {
                    out.insert(&id, f, o.direction)?;
                }
            }
        }
    }
    Ok(out)
}

pub fn oracle_id(gt_id: &str) -> String {
    format!("p_{gt_id}")
}

/// Relabels each track with `k` ids over consecutive, equally sized runs of
/// its active frames (sizes differ by at most one).
pub fn splitter_tracker(gt: &TrackSet, k: usize) -> Result<TrackSet> {
    let mut out = TrackSet::new(gt.grid());
    for (id, track) in gt.tracks() {
        let n = track.len();
        if k == 0 || k > n {
            return Err(Error::InvalidK { k, active: n });
        }
        let (base, extra) = (n / k, n % k);
        let mut frames = track.iter();
        for piece in 0..k {
            let size = base + usize::from(piece < extra);
            let label = format!("{id}#{piece}");
            for (&f, &d) in frames.by_ref().take(size) {
                out.insert(&label, f, d)?;
            }
        }
    }
    Ok(out)
}

pub const MERGED_ID: &str = "merged";

/// All tracks share one id. Where several are active in the same frame, the
/// lexicographically first track id wins.
pub fn merger_tracker(gt: &TrackSet) -> Result<TrackSet> {
    let mut out = TrackSet::new(gt.grid());
    for (f, entries) in gt.frames().into_iter().enumerate() {
        if let Some((_, d)) = entries.first() {
            out.insert(MERGED_ID, f, *d)?;
        }
    }
    Ok(out)
}

/// Every track gets label `p_<id>`, except that the first two tracks (by id)
/// exchange labels during every other window of `period_s` seconds.
pub fn swapper_tracker(gt: &TrackSet, period_s: f64) -> Result<TrackSet> {
    if !(period_s > 0.0) {
        return Err(Error::InvalidConfig("swap period must be > 0".into()));
    }
    let grid = gt.grid();
    let ids: Vec<&str> = gt.track_ids().collect();
    let mut out = TrackSet::new(grid);
    for (id, track) in gt.tracks() {
        for (&f, &d) in track {
            let swapped = ((grid.time_of(f) / period_s + 1e-9).floor() as u64) % 2 == 1;
            let label = match (swapped, ids.as_slice()) {
                (true, [a, b, ..]) if id == *a => oracle_id(b),
                (true, [a, b, ..]) if id == *b => oracle_id(a),
                _ => oracle_id(id),
            };
            out.insert(&label, f, d)?;
        }
    }
    Ok(out)
}

struct Track {
    id: String,
    particles: Vec<UnitVector>,
    estimate: UnitVector,
    misses: usize,
}

struct Candidate {
    dir: UnitVector,
    support: usize,
}

/// Online particle-filter tracker with bounded id issuance.
///
/// Per frame: predict every live track, associate observations greedily by
/// nearest distance within the gate, update associated tracks, age the
/// others, then grow birth candidates from leftover observations. A
/// confirmed candidate takes a fresh id while fewer than `k_max` ids were
/// issued, otherwise the most recently freed id. When all `max_active` slots
/// are taken, a candidate replaces the longest-unassociated track if that
/// track missed the current frame; otherwise it is dropped. Associated and
/// newborn tracks report their estimate; a coasting track keeps reporting its
/// prediction for `report_hold_frames` frames.
pub struct PfTracker {
    cfg: TrackerConfig,
    gate: f64,
    process_sigma: f64,
    obs_sigma: f64,
    kappa: f64,
    rng: ChaCha8Rng,
    live: Vec<Track>,
    candidates: Vec<Candidate>,
    issued: usize,
    /// (id, frame of death) for ids not currently live.
    dead: Vec<(String, usize)>,
}

impl PfTracker {
    pub fn new(cfg: TrackerConfig) -> Result<Self> {
        cfg.validate()?;
        let obs_sigma = cfg.obs_sigma_deg.to_radians();
        Ok(Self {
            gate: cfg.assoc_gate_deg.to_radians(),
            process_sigma: cfg.process_noise_deg.to_radians(),
            obs_sigma,
            kappa: if obs_sigma > 0.0 {
                1.0 / (obs_sigma * obs_sigma)
            } else {
                f64::INFINITY
            },
            rng: ChaCha8Rng::seed_from_u64(cfg.seed),
            live: Vec::new(),
            candidates: Vec::new(),
            issued: 0,
            dead: Vec::new(),
            cfg,
        })
    }

    /// Distinct ids issued so far.
    pub fn issued(&self) -> usize {
        self.issued
    }

    /// Processes one frame and returns the reported (id, direction) pairs.
    pub fn step(&mut self, frame: usize, observations: &[Direction]) -> Vec<(String, Direction)> {
        let obs: Vec<UnitVector> = observations.iter().map(Direction::to_unit).collect();
        self.predict();

        let assoc = greedy_pairs(
            self.live.iter().map(|t| t.estimate),
            obs.iter().copied(),
            self.gate,
        );
        let mut obs_used = vec![false; obs.len()];
        let mut track_obs: Vec<Option<usize>> = vec![None; self.live.len()];
        for (ti, oi) in assoc {
            track_obs[ti] = Some(oi);
            obs_used[oi] = true;
        }

        let mut reports = Vec::new();
        for (ti, slot) in track_obs.iter().enumerate() {
            match slot {
                Some(oi) => {
                    self.update(ti, &obs[*oi]);
                    let t = &self.live[ti];
                    reports.push((t.id.clone(), Direction::from_unit(t.estimate)));
                }
                None => self.live[ti].misses += 1,
            }
        }

        let death_frames = self.cfg.death_frames;
        let (alive, died): (Vec<Track>, Vec<Track>) = std::mem::take(&mut self.live)
            .into_iter()
            .partition(|t| t.misses < death_frames);
        self.live = alive;
        self.dead.extend(died.into_iter().map(|t| (t.id, frame)));

        let leftovers: Vec<UnitVector> = obs
            .iter()
            .zip(&obs_used)
            .filter(|(_, &u)| !u)
            .map(|(o, _)| *o)
            .collect();
        for dir in self.grow_candidates(&leftovers) {
            if self.live.len() >= self.cfg.max_active && !self.retire_stale(frame) {
                continue;
            }
            let Some(id) = self.next_id() else { continue };
            let particles = (0..self.cfg.n_particles)
                .map(|_| geometry::perturb(&dir, self.obs_sigma, &mut self.rng))
                .collect();
            reports.push((id.clone(), Direction::from_unit(dir)));
            self.live.push(Track {
                id,
                particles,
                estimate: dir,
                misses: 0,
            });
        }
        let hold = self.cfg.report_hold_frames;
        reports.extend(
            self.live
                .iter()
                .filter(|t| (1..=hold).contains(&t.misses))
                .map(|t| (t.id.clone(), Direction::from_unit(t.estimate))),
        );
        reports.sort_by(|a, b| a.0.cmp(&b.0));
        reports
    }

    fn predict(&mut self) {
        let sigma = self.process_sigma;
        for t in &mut self.live {
            if sigma > 0.0 {
                for p in &mut t.particles {
                    *p = geometry::perturb(p, sigma, &mut self.rng);
                }
            }
            t.estimate = mean_direction(&t.particles, None).unwrap_or(t.estimate);
        }
    }

    fn update(&mut self, ti: usize, obs: &UnitVector) {
        let kappa = self.kappa;
        let t = &mut self.live[ti];
        t.misses = 0;
        if !kappa.is_finite() {
            t.particles.iter_mut().for_each(|p| *p = *obs);
            t.estimate = *obs;
            return;
        }
        // exp(κ cos d), shifted by the best particle for stability
        let cosines: Vec<f64> = t.particles.iter().map(|p| p.dot(obs)).collect();
        let best = cosines.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let weights: Vec<f64> = cosines.iter().map(|c| (kappa * (c - best)).exp()).collect();
        let total: f64 = weights.iter().sum();
        let weights: Vec<f64> = weights.iter().map(|w| w / total).collect();
        t.estimate = mean_direction(&t.particles, Some(&weights)).unwrap_or(*obs);
        t.particles = systematic_resample(&t.particles, &weights, &mut self.rng);
    }

    /// Matches leftover observations to candidates; returns the directions of
    /// candidates that reached `birth_frames` consecutive supports.
    fn grow_candidates(&mut self, leftovers: &[UnitVector]) -> Vec<UnitVector> {
        let pairs = greedy_pairs(
            self.candidates.iter().map(|c| c.dir),
            leftovers.iter().copied(),
            self.gate,
        );
        let mut used = vec![false; leftovers.len()];
        let mut next = Vec::new();
        for (ci, oi) in pairs {
            used[oi] = true;
            next.push(Candidate {
                dir: leftovers[oi],
                support: self.candidates[ci].support + 1,
            });
        }
        next.extend(
            leftovers
                .iter()
                .zip(&used)
                .filter(|(_, &u)| !u)
                .map(|(o, _)| Candidate { dir: *o, support: 1 }),
        );
        let birth = self.cfg.birth_frames;
        let (ready, pending): (Vec<Candidate>, Vec<Candidate>) =
            next.into_iter().partition(|c| c.support >= birth);
        self.candidates = pending;
        ready.into_iter().map(|c| c.dir).collect()
    }

    /// Frees a slot for a confirmed candidate by ending the live track that
    /// has gone unassociated the longest, provided it missed this frame.
    fn retire_stale(&mut self, frame: usize) -> bool {
        let Some((idx, misses)) = self
            .live
            .iter()
            .enumerate()
            .map(|(i, t)| (i, t.misses))
            .max_by(|a, b| a.1.cmp(&b.1).then(b.0.cmp(&a.0)))
        else {
            return false;
        };
        if misses == 0 {
            return false;
        }
        let t = self.live.remove(idx);
        self.dead.push((t.id, frame));
        true
    }

    fn next_id(&mut self) -> Option<String> {
        if self.cfg.k_max.is_none_or(|k| self.issued < k) {
            let id = format!("trk{}", self.issued);
            self.issued += 1;
            return Some(id);
        }
        // reuse the most recently freed id; among equal frames the last freed
        let idx = self
            .dead
            .iter()
            .enumerate()
            .max_by(|(i, a), (j, b)| a.1.cmp(&b.1).then(i.cmp(j)))?
            .0;
        Some(self.dead.remove(idx).0)
    }
}

/// Greedy nearest-first pairing within `gate`; returns (left, right) indices.
fn greedy_pairs(
    left: impl Iterator<Item = UnitVector>,
    right: impl Iterator<Item = UnitVector> + Clone,
    gate: f64,
) -> Vec<(usize, usize)> {
    let mut cands: Vec<(f64, usize, usize)> = Vec::new();
    let right: Vec<UnitVector> = right.collect();
    for (i, l) in left.enumerate() {
        for (j, r) in right.iter().enumerate() {
            let d = l.angle_to(r);
            if d <= gate {
                cands.push((d, i, j));
            }
        }
    }
    cands.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let mut left_used = std::collections::HashSet::new();
    let mut right_used = std::collections::HashSet::new();
    let mut out = Vec::new();
    for (_, i, j) in cands {
        if !left_used.contains(&i) && !right_used.contains(&j) {
            left_used.insert(i);
            right_used.insert(j);
            out.push((i, j));
        }
    }
    out
}

fn mean_direction(points: &[UnitVector], weights: Option<&[f64]>) -> Option<UnitVector> {
    let mut acc = [0.0; 3];
    for (i, p) in points.iter().enumerate() {
        let w = weights.map_or(1.0, |w| w[i]);
        for k in 0..3 {
            acc[k] += w * p.0[k];
        }
    }
    UnitVector::normalize(acc)
}

fn systematic_resample<R: Rng>(particles: &[UnitVector], weights: &[f64], rng: &mut R) -> Vec<UnitVector> {
    let n = particles.len();
    let step = 1.0 / n as f64;
    let mut u = rng.random_range(0.0..step);
    let mut cum = weights[0];
    let mut i = 0;
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        while u > cum && i + 1 < n {
            i += 1;
            cum += weights[i];
        }
        out.push(particles[i]);
        u += step;
    }
    out
}

/// Runs the particle-filter tracker over a whole observation set.
pub fn pf_tracker(obs: &ObservationSet, cfg: &TrackerConfig) -> Result<TrackSet> {
    let mut tracker = PfTracker::new(cfg.clone())?;
    let mut out = TrackSet::new(obs.grid());
    for (f, frame) in obs.frames().iter().enumerate() {
        let dirs: Vec<Direction> = frame.iter().map(|o| o.direction).collect();
        for (id, d) in tracker.step(f, &dirs) {
            out.insert(&id, f, d)?;
        }
    }
    Ok(out)
}

/// Tracker selection as read from JSON (`{"kind": "pf", ...}`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TrackerSpec {
    Oracle,
    Pf(TrackerConfig),
    Splitter { k: usize },
    Merger,
    Swapper { period_s: f64 },
}

impl TrackerSpec {
    /// Whether the tracker reads ground truth instead of observations.
    pub fn needs_ground_truth(&self) -> bool {
        matches!(
            self,
            TrackerSpec::Splitter { .. } | TrackerSpec::Merger | TrackerSpec::Swapper { .. }
        )
    }

    pub fn run(&self, obs: Option<&ObservationSet>, gt: Option<&TrackSet>) -> Result<TrackSet> {
        let need_obs = || obs.ok_or_else(|| Error::InvalidConfig("observations required".into()));
        let need_gt = || gt.ok_or_else(|| Error::InvalidConfig("ground truth required".into()));
        match self {
            TrackerSpec::Oracle => oracle_tracker(need_obs()?),
            TrackerSpec::Pf(cfg) => pf_tracker(need_obs()?, cfg),
            TrackerSpec::Splitter { k } => splitter_tracker(need_gt()?, *k),
            TrackerSpec::Merger => merger_tracker(need_gt()?),
            TrackerSpec::Swapper { period_s } => swapper_tracker(need_gt()?, *period_s),
        }
    }
}
