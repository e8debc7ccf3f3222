//! Per-frame gated one-to-one matching of predictions to ground truths.

use crate::error::{Error, Result};
use crate::geometry::{angular_distance, Direction};
use crate::hungarian;
use crate::trackmodel::{FrameGrid, TrackSet};

/// Default matching gate, degrees.
pub const DEFAULT_GATE_DEG: f64 = 20.0;

#[derive(Debug, Clone, PartialEq)]
pub struct TruePositive {
    pub pred_id: String,
    pub gt_id: String,
    /// Angular error in radians.
    pub error: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct FrameAssignment {
    pub tps: Vec<TruePositive>,
    pub fps: Vec<String>,
    pub fns: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MatchSequence {
    pub grid: FrameGrid,
    pub frames: Vec<FrameAssignment>,
}

impl MatchSequence {
    pub fn n_tp(&self) -> usize {
        self.frames.iter().map(|f| f.tps.len()).sum()
    }

    pub fn n_fp(&self) -> usize {
        self.frames.iter().map(|f| f.fps.len()).sum()
    }

    pub fn n_fn(&self) -> usize {
        self.frames.iter().map(|f| f.fns.len()).sum()
    }
}

/// Maximum-cardinality, then minimum-total-error matching within `gate`.
///
/// Out-of-gate pairs carry a cost larger than any achievable sum of in-gate
/// errors, so the assignment solver first maximizes the number of in-gate
/// pairs and only then minimizes their total error. Inputs are ordered by id
/// before solving, which makes the result independent of input order.
pub fn match_frame(
    preds: &[(&str, Direction)],
    gts: &[(&str, Direction)],
    gate: f64,
) -> FrameAssignment {
    let mut preds: Vec<_> = preds.to_vec();
    let mut gts: Vec<_> = gts.to_vec();
    preds.sort_by(|a, b| a.0.cmp(b.0));
    gts.sort_by(|a, b| a.0.cmp(b.0));

    let dist: Vec<Vec<f64>> = preds
        .iter()
        .map(|(_, p)| gts.iter().map(|(_, g)| angular_distance(p, g)).collect())
        .collect();
    let forbidden = gate * (preds.len().min(gts.len()) as f64 + 1.0) + 1.0;
    let costs: Vec<Vec<f64>> = dist
        .iter()
        .map(|row| {
            row.iter()
                .map(|&d| if d <= gate { d } else { forbidden })
                .collect()
        })
        .collect();

    let mut pred_used = vec![false; preds.len()];
    let mut gt_used = vec![false; gts.len()];
    let mut out = FrameAssignment::default();
    for (i, j) in hungarian::solve_rect(&costs) {
        if dist[i][j] <= gate {
            pred_used[i] = true;
            gt_used[j] = true;
            out.tps.push(TruePositive {
                pred_id: preds[i].0.to_owned(),
                gt_id: gts[j].0.to_owned(),
                error: dist[i][j],
            });
        }
    }
    out.fps = preds
        .iter()
        .zip(&pred_used)
        .filter(|(_, &u)| !u)
        .map(|((id, _), _)| (*id).to_owned())
        .collect();
    out.fns = gts
        .iter()
        .zip(&gt_used)
        .filter(|(_, &u)| !u)
        .map(|((id, _), _)| (*id).to_owned())
        .collect();
    out
}

pub fn check_grids(a: &FrameGrid, b: &FrameGrid) -> Result<()> {
    if a.n_frames != b.n_frames || (a.frame_period - b.frame_period).abs() > 1e-12 {
        return Err(Error::GridMismatch(format!(
            "{} frames @ {} s vs {} frames @ {} s",
            a.n_frames, a.frame_period, b.n_frames, b.frame_period
        )));
    }
    Ok(())
}

pub fn match_sequence(preds: &TrackSet, gts: &TrackSet, gate: f64) -> Result<MatchSequence> {
    check_grids(&preds.grid(), &gts.grid())?;
    let pred_frames = preds.frames();
    let gt_frames = gts.frames();
    let frames = pred_frames
        .iter()
        .zip(&gt_frames)
        .map(|(p, g)| match_frame(p, g, gate))
        .collect();
    Ok(MatchSequence {
        grid: gts.grid(),
        frames,
    })
}
