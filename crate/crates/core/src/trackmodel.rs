//! Identity-labeled, time-sparse track containers and their CSV format.
//!
//! Track CSV: header `frame,time_s,track_id,azimuth_deg,elevation_deg`, one
//! row per active (track, frame), angles in degrees with 6 decimals, LF line
//! endings. Observation CSV adds a trailing `source_id` column (empty for
//! clutter). The frame grid lives in a JSON sidecar
//! `{"frame_period_s": .., "n_frames": ..}`.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Direction;

pub const TRACK_HEADER: &str = "frame,time_s,track_id,azimuth_deg,elevation_deg";
pub const OBS_HEADER: &str = "frame,time_s,track_id,azimuth_deg,elevation_deg,source_id";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrameGrid {
    #[serde(rename = "frame_period_s")]
    pub frame_period: f64,
    pub n_frames: usize,
}

impl FrameGrid {
    pub fn new(frame_period: f64, n_frames: usize) -> Result<Self> {
        if !(frame_period > 0.0 && frame_period.is_finite()) || n_frames == 0 {
            return Err(Error::InvalidConfig(format!(
                "frame grid needs period > 0 and n_frames ≥ 1 (got {frame_period}, {n_frames})"
            )));
        }
        Ok(Self {
            frame_period,
            n_frames,
        })
    }

    /// Total duration in seconds.
    pub fn duration(&self) -> f64 {
        self.frame_period * self.n_frames as f64
    }

    pub fn time_of(&self, frame: usize) -> f64 {
        frame as f64 * self.frame_period
    }

    pub fn read_manifest(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let grid: FrameGrid = serde_json::from_str(&text)?;
        FrameGrid::new(grid.frame_period, grid.n_frames)
    }

    pub fn write_manifest(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string(self)? + "\n";
        fs::write(path, text).map_err(|e| Error::io(path, e))
    }
}

/// Sparse per-track trajectories; a track is inactive wherever it has no entry.
#[derive(Debug, Clone, PartialEq)]
pub struct TrackSet {
    grid: FrameGrid,
    tracks: BTreeMap<String, BTreeMap<usize, Direction>>,
}

impl TrackSet {
    pub fn new(grid: FrameGrid) -> Self {
        Self {
            grid,
            tracks: BTreeMap::new(),
        }
    }

    pub fn grid(&self) -> FrameGrid {
        self.grid
    }

    pub fn insert(&mut self, track_id: &str, frame: usize, dir: Direction) -> Result<()> {
        if frame >= self.grid.n_frames {
            return Err(Error::FrameOutOfRange {
                frame,
                n_frames: self.grid.n_frames,
            });
        }
        let track = self.tracks.entry(track_id.to_owned()).or_default();
        if track.contains_key(&frame) {
            return Err(Error::DuplicateEntry {
                track_id: track_id.to_owned(),
                frame,
            });
        }
        track.insert(frame, dir);
        Ok(())
    }

    pub fn n_tracks(&self) -> usize {
        self.tracks.len()
    }

    pub fn track_ids(&self) -> impl Iterator<Item = &str> {
        self.tracks.keys().map(String::as_str)
    }

    pub fn track(&self, track_id: &str) -> Option<&BTreeMap<usize, Direction>> {
        self.tracks.get(track_id)
    }

    pub fn tracks(&self) -> impl Iterator<Item = (&str, &BTreeMap<usize, Direction>)> {
        self.tracks.iter().map(|(k, v)| (k.as_str(), v))
    }

    /// Number of stored (track, frame) entries.
    pub fn n_entries(&self) -> usize {
        self.tracks.values().map(BTreeMap::len).sum()
    }

    pub fn get(&self, track_id: &str, frame: usize) -> Option<Direction> {
        self.tracks.get(track_id)?.get(&frame).copied()
    }

    /// Active entries per frame, ordered by track id.
    pub fn frames(&self) -> Vec<Vec<(&str, Direction)>> {
        let mut out = vec![Vec::new(); self.grid.n_frames];
        for (id, track) in &self.tracks {
            for (&f, &d) in track {
                out[f].push((id.as_str(), d));
            }
        }
        out
    }

    pub fn activity_mask(&self, track_id: &str) -> Result<Vec<bool>> {
        let track = self
            .tracks
            .get(track_id)
            .ok_or_else(|| Error::UnknownTrack(track_id.to_owned()))?;
        let mut mask = vec![false; self.grid.n_frames];
        for &f in track.keys() {
            mask[f] = true;
        }
        Ok(mask)
    }

    pub fn read_csv<R: Read>(grid: FrameGrid, reader: R) -> Result<Self> {
        let mut ts = TrackSet::new(grid);
        for row in read_rows(reader, TRACK_HEADER, false)?.1 {
            ts.insert(&row.track_id, row.frame, row.direction)
                .map_err(|e| at_line(row.line, e))?;
        }
        Ok(ts)
    }

    pub fn read_path(grid: FrameGrid, path: &Path) -> Result<Self> {
        let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_csv(grid, file)
    }

    /// Writes rows sorted by (frame, track_id).
    pub fn write_csv<W: Write>(&self, mut writer: W) -> std::io::Result<()> {
        let mut out = String::with_capacity(64 * (self.n_entries() + 1));
        out.push_str(TRACK_HEADER);
        out.push('\n');
        for (f, entries) in self.frames().into_iter().enumerate() {
            for (id, d) in entries {
                push_row(&mut out, &self.grid, f, id, d);
                out.push('\n');
            }
        }
        writer.write_all(out.as_bytes())
    }

    pub fn write_path(&self, path: &Path) -> Result<()> {
        let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv(std::io::BufWriter::new(file))
            .map_err(|e| Error::io(path, e))
    }
}

/// One observed direction, optionally tagged with the ground-truth source
/// that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub direction: Direction,
    pub source_id: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ObservationSet {
    grid: FrameGrid,
    frames: Vec<Vec<Observation>>,
    /// Whether the producer recorded source tags at all.
    tagged: bool,
}

impl ObservationSet {
    pub fn new(grid: FrameGrid, tagged: bool) -> Self {
        Self {
            grid,
            frames: vec![Vec::new(); grid.n_frames],
            tagged,
        }
    }

    pub fn grid(&self) -> FrameGrid {
        self.grid
    }

    pub fn is_tagged(&self) -> bool {
        self.tagged
    }

    pub fn push(&mut self, frame: usize, obs: Observation) -> Result<()> {
        let n_frames = self.grid.n_frames;
        self.frames
            .get_mut(frame)
            .ok_or(Error::FrameOutOfRange { frame, n_frames })?
            .push(obs);
        Ok(())
    }

    pub fn frame(&self, frame: usize) -> &[Observation] {
        &self.frames[frame]
    }

    pub fn frames(&self) -> &[Vec<Observation>] {
        &self.frames
    }

    pub fn len(&self) -> usize {
        self.frames.iter().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Reads an observation CSV. The `source_id` column is optional; without
    /// it the set is untagged.
    pub fn read_csv<R: Read>(grid: FrameGrid, reader: R) -> Result<Self> {
        let (tagged, rows) = read_rows(reader, TRACK_HEADER, true)?;
        let mut set = ObservationSet::new(grid, tagged);
        let mut seen = std::collections::HashSet::new();
        for row in rows {
            if !seen.insert((row.frame, row.track_id.clone())) {
                return Err(at_line(
                    row.line,
                    Error::DuplicateEntry {
                        track_id: row.track_id,
                        frame: row.frame,
                    },
                ));
            }
            set.push(
                row.frame,
                Observation {
                    direction: row.direction,
                    source_id: row.source_id,
                },
            )
            .map_err(|e| at_line(row.line, e))?;
        }
        Ok(set)
    }

    pub fn read_path(grid: FrameGrid, path: &Path) -> Result<Self> {
        let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_csv(grid, file)
    }

    /// Observation `k` of a frame is labeled `obsNNN`.
    pub fn write_csv<W: Write>(&self, mut writer: W) -> std::io::Result<()> {
        let mut out = String::new();
        out.push_str(if self.tagged { OBS_HEADER } else { TRACK_HEADER });
        out.push('\n');
        for (f, obs) in self.frames.iter().enumerate() {
            for (k, o) in obs.iter().enumerate() {
                push_row(&mut out, &self.grid, f, &format!("obs{k:03}"), o.direction);
                if self.tagged {
                    out.push(',');
                    out.push_str(o.source_id.as_deref().unwrap_or(""));
                }
                out.push('\n');
            }
        }
        writer.write_all(out.as_bytes())
    }

    pub fn write_path(&self, path: &Path) -> Result<()> {
        let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv(std::io::BufWriter::new(file))
            .map_err(|e| Error::io(path, e))
    }
}

fn push_row(out: &mut String, grid: &FrameGrid, frame: usize, id: &str, d: Direction) {
    let _ = write!(
        out,
        "{},{:.6},{},{:.6},{:.6}",
        frame,
        grid.time_of(frame),
        id,
        d.azimuth_deg(),
        d.elevation_deg()
    );
}

fn at_line(line: u64, err: Error) -> Error {
    Error::Parse {
        line,
        message: err.to_string(),
    }
}

struct Row {
    line: u64,
    frame: usize,
    track_id: String,
    direction: Direction,
    source_id: Option<String>,
}

fn read_rows<R: Read>(reader: R, header: &str, allow_source: bool) -> Result<(bool, Vec<Row>)> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(reader);
    let mut records = rdr.records();
    let expected: Vec<&str> = header.split(',').collect();
    let has_source = match records.next() {
        None => return Ok((false, Vec::new())),
        Some(rec) => {
            let rec = rec.map_err(csv_error)?;
            let fields: Vec<&str> = rec.iter().collect();
            if fields == expected {
                false
            } else if allow_source
                && fields.len() == expected.len() + 1
                && fields[..expected.len()] == expected[..]
                && fields[expected.len()] == "source_id"
            {
                true
            } else {
                return Err(Error::Parse {
                    line: 1,
                    message: format!("unexpected header {:?}", fields.join(",")),
                });
            }
        }
    };
    let width = expected.len() + usize::from(has_source);

    let mut rows = Vec::new();
    for rec in records {
        let rec = rec.map_err(csv_error)?;
        let line = rec.position().map_or(0, |p| p.line());
        let bad = |message: String| Error::Parse { line, message };
        if rec.len() != width {
            return Err(bad(format!("expected {width} fields, found {}", rec.len())));
        }
        let frame: usize = rec[0]
            .parse()
            .map_err(|_| bad(format!("bad frame index {:?}", &rec[0])))?;
        rec[1]
            .parse::<f64>()
            .map_err(|_| bad(format!("bad time {:?}", &rec[1])))?;
        let track_id = rec[2].to_owned();
        if track_id.is_empty() {
            return Err(bad("empty track id".into()));
        }
        let angle = |i: usize| -> Result<f64> {
            rec[i]
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| bad(format!("bad angle {:?}", &rec[i])))
        };
        let direction = Direction::from_degrees(angle(3)?, angle(4)?);
        let source_id = if has_source && !rec[5].is_empty() {
            Some(rec[5].to_owned())
        } else {
            None
        };
        rows.push(Row {
            line,
            frame,
            track_id,
            direction,
            source_id,
        });
    }
    Ok((has_source, rows))
}

fn csv_error(e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line());
    Error::Parse {
        line,
        message: e.to_string(),
    }
}
