//! Frame-level metrics: swaps / IDSW, broken tracks, TSR, TFR, MOTA, OSPA and
//! mean localization error.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::geometry::{angular_distance, Direction};
use crate::hungarian;
use crate::matching::MatchSequence;
use crate::trackmodel::TrackSet;

pub const DEFAULT_OSPA_CUTOFF_DEG: f64 = 30.0;
pub const DEFAULT_OSPA_ORDER: f64 = 1.0;

/// Counts changes of the matched pred id per ground-truth track.
///
/// The reference pred id is the one at the gt's most recent matched frame;
/// inactive or unmatched frames in between do not reset it.
pub fn count_swaps(ms: &MatchSequence) -> usize {
    let mut last: HashMap<&str, &str> = HashMap::new();
    let mut swaps = 0;
    for frame in &ms.frames {
        for tp in &frame.tps {
            if let Some(prev) = last.insert(&tp.gt_id, &tp.pred_id) {
                if prev != tp.pred_id {
                    swaps += 1;
                }
            }
        }
    }
    swaps
}

/// Identity switches; same counting rule as [`count_swaps`].
pub fn idsw(ms: &MatchSequence) -> usize {
    count_swaps(ms)
}

/// Number of (gt, f) where the gt is matched at f, still active at f+1, and
/// unmatched at f+1.
pub fn count_broken(ms: &MatchSequence, gts: &TrackSet) -> usize {
    ms.frames
        .windows(2)
        .enumerate()
        .map(|(f, pair)| {
            pair[0]
                .tps
                .iter()
                .filter(|tp| {
                    gts.get(&tp.gt_id, f + 1).is_some()
                        && pair[1].fns.iter().any(|g| g == &tp.gt_id)
                })
                .count()
        })
        .sum()
}

/// Swaps per second.
pub fn tsr(n_swaps: usize, duration_s: f64) -> f64 {
    n_swaps as f64 / duration_s
}

/// Swaps plus broken tracks per second.
pub fn tfr(n_swaps: usize, n_broken: usize, duration_s: f64) -> f64 {
    (n_swaps + n_broken) as f64 / duration_s
}

/// CLEAR accuracy: `1 - (FN + FP + IDSW) / GT detections`.
pub fn mota(n_fn: usize, n_fp: usize, n_idsw: usize, n_gt_detections: usize) -> Result<f64> {
    if n_gt_detections == 0 {
        return Err(Error::UndefinedOnEmptyGroundTruth);
    }
    Ok(1.0 - (n_fn + n_fp + n_idsw) as f64 / n_gt_detections as f64)
}

/// OSPA distance between two direction sets, in radians.
///
/// With `m ≤ n` the two cardinalities, the smaller set is padded with `n - m`
/// dummies at distance `cutoff` and the optimal assignment is taken over
/// `min(d, cutoff)^order`.
pub fn ospa_frame(preds: &[Direction], gts: &[Direction], cutoff: f64, order: f64) -> f64 {
    let (small, large) = if preds.len() <= gts.len() {
        (preds, gts)
    } else {
        (gts, preds)
    };
    let n = large.len();
    if n == 0 {
        return 0.0;
    }
    let pen = cutoff.powf(order);
    let costs: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            large
                .iter()
                .map(|b| match small.get(i) {
                    Some(a) => angular_distance(a, b).min(cutoff).powf(order),
                    None => pen,
                })
                .collect()
        })
        .collect();
    let total: f64 = hungarian::solve(&costs)
        .iter()
        .enumerate()
        .map(|(i, &j)| costs[i][j])
        .sum();
    (total / n as f64).powf(1.0 / order).min(cutoff)
}

/// Per-frame OSPA averaged over frames where either set is non-empty; 0 when
/// every frame is empty.
pub fn ospa_mean(preds: &TrackSet, gts: &TrackSet, cutoff: f64, order: f64) -> f64 {
    let pf = preds.frames();
    let gf = gts.frames();
    let mut sum = 0.0;
    let mut count = 0usize;
    for (p, g) in pf.iter().zip(&gf) {
        if p.is_empty() && g.is_empty() {
            continue;
        }
        let pd: Vec<Direction> = p.iter().map(|(_, d)| *d).collect();
        let gd: Vec<Direction> = g.iter().map(|(_, d)| *d).collect();
        sum += ospa_frame(&pd, &gd, cutoff, order);
        count += 1;
    }
    if count == 0 {
        0.0
    } else {
        sum / count as f64
    }
}

/// Mean TP angular error in radians.
pub fn mean_localization_error(ms: &MatchSequence) -> Result<f64> {
    let (sum, n) = ms
        .frames
        .iter()
        .flat_map(|f| &f.tps)
        .fold((0.0, 0usize), |(s, n), tp| (s + tp.error, n + 1));
    if n == 0 {
        return Err(Error::UndefinedOnEmptyTp);
    }
    Ok(sum / n as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matching::{match_sequence, FrameAssignment, TruePositive};
    use crate::trackmodel::FrameGrid;
    use std::f64::consts::PI;

    const DEG: f64 = PI / 180.0;

    fn tp(p: &str, g: &str, error: f64) -> FrameAssignment {
        FrameAssignment {
            tps: vec![TruePositive {
                pred_id: p.into(),
                gt_id: g.into(),
                error,
            }],
            ..Default::default()
        }
    }

    fn seq(frames: Vec<FrameAssignment>) -> MatchSequence {
        MatchSequence {
            grid: FrameGrid::new(0.1, frames.len()).unwrap(),
            frames,
        }
    }

    fn track(id: &str, frames: impl Iterator<Item = usize>, ts: &mut TrackSet) {
        for f in frames {
            ts.insert(id, f, Direction::from_degrees(0.0, 0.0)).unwrap();
        }
    }

    #[test]
    fn swap_examples() {
        let perfect = seq((0..20).map(|_| tp("p", "g", 0.0)).collect());
        assert_eq!(count_swaps(&perfect), 0);

        let split = seq((0..100)
            .map(|f| tp(if f < 50 { "p1" } else { "p2" }, "g", 0.0))
            .collect());
        assert_eq!(count_swaps(&split), 1);
        assert_eq!(idsw(&split), 1);

        let mut frames: Vec<FrameAssignment> = (0..5).map(|_| tp("p1", "g", 0.0)).collect();
        frames.extend((0..10).map(|_| FrameAssignment::default()));
        frames.extend((0..5).map(|_| tp("p2", "g", 0.0)));
        assert_eq!(count_swaps(&seq(frames)), 1);
    }

    #[test]
    fn merge_has_no_swaps() {
        let merge = seq((0..100)
            .map(|f| tp("p", if f < 50 { "g1" } else { "g2" }, 0.0))
            .collect());
        assert_eq!(count_swaps(&merge), 0);
    }

    #[test]
    fn broken_examples() {
        let grid = FrameGrid::new(0.1, 10).unwrap();
        let mut gt = TrackSet::new(grid);
        track("g", 0..10, &mut gt);
        let ms = match_sequence(&gt, &gt, 0.3).unwrap();
        assert_eq!(count_broken(&ms, &gt), 0);

        let mut pred = TrackSet::new(grid);
        track("p", 0..5, &mut pred);
        let ms = match_sequence(&pred, &gt, 0.3).unwrap();
        assert_eq!(count_broken(&ms, &gt), 1);

        let mut gt_short = TrackSet::new(grid);
        track("g", 0..5, &mut gt_short);
        let ms = match_sequence(&pred, &gt_short, 0.3).unwrap();
        assert_eq!(count_broken(&ms, &gt_short), 0);
    }

    #[test]
    fn rates() {
        assert_eq!(tsr(0, 10.0), 0.0);
        assert!((tsr(1, 10.0) - 0.1).abs() < 1e-15);
        assert!((tfr(1, 2, 10.0) - 0.3).abs() < 1e-15);
        // one ID change every ~3.6 s
        assert!((1.0 / 0.28f64 - 3.571).abs() < 1e-3);
    }

    #[test]
    fn mota_examples() {
        assert_eq!(mota(0, 0, 0, 50).unwrap(), 1.0);
        assert!((mota(10, 5, 2, 100).unwrap() - 0.83).abs() < 1e-12);
        assert_eq!(mota(40, 0, 0, 40).unwrap(), 0.0);
        assert!(matches!(mota(0, 1, 0, 0), Err(Error::UndefinedOnEmptyGroundTruth)));
    }

    #[test]
    fn ospa_examples() {
        let c = 30.0 * DEG;
        let a = [Direction::from_degrees(10.0, 3.0), Direction::from_degrees(-50.0, 0.0)];
        assert!(ospa_frame(&a, &a, c, 1.0) < 1e-7);
        let g = [Direction::from_degrees(0.0, 0.0)];
        assert!((ospa_frame(&[], &g, c, 1.0) - c).abs() < 1e-12);
        let p = [Direction::from_degrees(10.0, 0.0)];
        assert!((ospa_frame(&p, &g, c, 1.0) - 10.0 * DEG).abs() < 1e-12);
        assert_eq!(ospa_frame(&[], &[], c, 1.0), 0.0);
        // extra element strictly increases, symmetric
        let two = [g[0], Direction::from_degrees(90.0, 0.0)];
        assert!(ospa_frame(&p, &two, c, 1.0) > ospa_frame(&p, &g, c, 1.0));
        assert_eq!(ospa_frame(&p, &two, c, 2.0), ospa_frame(&two, &p, c, 2.0));
    }

    #[test]
    fn localization_error() {
        let ms = seq(vec![tp("p", "g", 2.0 * DEG), tp("p", "g", 4.0 * DEG)]);
        assert!((mean_localization_error(&ms).unwrap() - 3.0 * DEG).abs() < 1e-15);
        assert!(matches!(
            mean_localization_error(&seq(vec![FrameAssignment::default()])),
            Err(Error::UndefinedOnEmptyTp)
        ));
    }
}
