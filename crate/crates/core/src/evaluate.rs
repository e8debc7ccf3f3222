//! Scene evaluation: matching followed by every frame-level and association
//! metric, collected into one [`MetricsReport`].

use serde::{Deserialize, Serialize};

use crate::assoc_metrics::{self, AssociationScores};
use crate::error::Result;
use crate::frame_metrics as fm;
use crate::matching::{self, MatchSequence};
use crate::trackmodel::TrackSet;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvalConfig {
    pub gate_deg: f64,
    pub ospa_cutoff_deg: f64,
    pub ospa_order: f64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            gate_deg: matching::DEFAULT_GATE_DEG,
            ospa_cutoff_deg: fm::DEFAULT_OSPA_CUTOFF_DEG,
            ospa_order: fm::DEFAULT_OSPA_ORDER,
        }
    }
}

/// Scalar metrics for one scene. Angles in radians; `None` marks a metric
/// that is undefined for the scene (no TP, or no ground truth).
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    pub n_tp: usize,
    pub n_fp: usize,
    pub n_fn: usize,
    pub n_gt_detections: usize,
    pub n_gt_tracks: usize,
    pub n_swaps: usize,
    pub n_broken: usize,
    pub n_idsw: usize,
    pub duration_s: f64,
    pub tsr: f64,
    pub tfr: f64,
    /// TSR normalized per ground-truth track instead of per scene.
    pub tsr_per_track: Option<f64>,
    pub tfr_per_track: Option<f64>,
    pub mota: Option<f64>,
    pub ospa_mean: f64,
    pub mean_loc_error: Option<f64>,
    pub assoc: Option<AssociationScores>,
}

impl MetricsReport {
    pub fn ass_a(&self) -> Option<f64> {
        self.assoc.map(|a| a.ass_a)
    }

    pub fn ass_pr(&self) -> Option<f64> {
        self.assoc.map(|a| a.ass_pr)
    }

    pub fn ass_re(&self) -> Option<f64> {
        self.assoc.map(|a| a.ass_re)
    }

    /// Named scalar view used by aggregation; angles in degrees.
    pub fn metric(&self, name: Metric) -> Option<f64> {
        match name {
            Metric::Tsr => Some(self.tsr),
            Metric::Tfr => Some(self.tfr),
            Metric::TsrPerTrack => self.tsr_per_track,
            Metric::TfrPerTrack => self.tfr_per_track,
            Metric::Idsw => Some(self.n_idsw as f64),
            Metric::Mota => self.mota,
            Metric::OspaMean => Some(self.ospa_mean.to_degrees()),
            Metric::MeanLocErrorDeg => self.mean_loc_error.map(f64::to_degrees),
            Metric::AssA => self.ass_a(),
            Metric::AssPr => self.ass_pr(),
            Metric::AssRe => self.ass_re(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Metric {
    Tsr,
    Tfr,
    TsrPerTrack,
    TfrPerTrack,
    Idsw,
    Mota,
    OspaMean,
    MeanLocErrorDeg,
    AssA,
    AssPr,
    AssRe,
}

impl Metric {
    pub const ALL: [Metric; 11] = [
        Metric::Tsr,
        Metric::Tfr,
        Metric::TsrPerTrack,
        Metric::TfrPerTrack,
        Metric::Idsw,
        Metric::Mota,
        Metric::OspaMean,
        Metric::MeanLocErrorDeg,
        Metric::AssA,
        Metric::AssPr,
        Metric::AssRe,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Metric::Tsr => "tsr",
            Metric::Tfr => "tfr",
            Metric::TsrPerTrack => "tsr_per_track",
            Metric::TfrPerTrack => "tfr_per_track",
            Metric::Idsw => "idsw",
            Metric::Mota => "mota",
            Metric::OspaMean => "ospa_mean",
            Metric::MeanLocErrorDeg => "mean_loc_error_deg",
            Metric::AssA => "ass_a",
            Metric::AssPr => "ass_pr",
            Metric::AssRe => "ass_re",
        }
    }
}

pub fn evaluate(preds: &TrackSet, gts: &TrackSet, cfg: &EvalConfig) -> Result<MetricsReport> {
    let ms = matching::match_sequence(preds, gts, cfg.gate_deg.to_radians())?;
    Ok(report_from_matches(&ms, preds, gts, cfg))
}

pub fn report_from_matches(
    ms: &MatchSequence,
    preds: &TrackSet,
    gts: &TrackSet,
    cfg: &EvalConfig,
) -> MetricsReport {
    let n_tp = ms.n_tp();
    let n_fp = ms.n_fp();
    let n_fn = ms.n_fn();
    let n_swaps = fm::count_swaps(ms);
    let n_idsw = fm::idsw(ms);
    let n_broken = fm::count_broken(ms, gts);
    let duration_s = gts.grid().duration();
    let n_gt_tracks = gts.n_tracks();
    let n_gt_detections = gts.n_entries();
    let per_track = |rate: f64| (n_gt_tracks > 0).then(|| rate / n_gt_tracks as f64);
    let tsr = fm::tsr(n_swaps, duration_s);
    let tfr = fm::tfr(n_swaps, n_broken, duration_s);
    let counts = assoc_metrics::count_associations(ms);

    MetricsReport {
        n_tp,
        n_fp,
        n_fn,
        n_gt_detections,
        n_gt_tracks,
        n_swaps,
        n_broken,
        n_idsw,
        duration_s,
        tsr,
        tfr,
        tsr_per_track: per_track(tsr),
        tfr_per_track: per_track(tfr),
        mota: fm::mota(n_fn, n_fp, n_idsw, n_gt_detections).ok(),
        ospa_mean: fm::ospa_mean(
            preds,
            gts,
            cfg.ospa_cutoff_deg.to_radians(),
            cfg.ospa_order,
        ),
        mean_loc_error: fm::mean_localization_error(ms).ok(),
        assoc: assoc_metrics::scores(&counts),
    }
}

/// Columns of the per-scene metrics CSV.
pub const SCENE_CSV_HEADER: &str = "scene_id,n_tp,n_fp,n_fn,tsr,tfr,idsw,mota,ospa_mean,mean_loc_error_deg,ass_a,ass_pr,ass_re";

/// One per-scene CSV row. Undefined values are left empty; angles in degrees.
pub fn scene_csv_row(scene_id: &str, r: &MetricsReport) -> String {
    let opt = |v: Option<f64>| v.map(|x| format!("{x:.6}")).unwrap_or_default();
    format!(
        "{},{},{},{},{:.6},{:.6},{},{},{:.6},{},{},{},{}",
        scene_id,
        r.n_tp,
        r.n_fp,
        r.n_fn,
        r.tsr,
        r.tfr,
        r.n_idsw,
        opt(r.mota),
        r.ospa_mean.to_degrees(),
        opt(r.mean_loc_error.map(f64::to_degrees)),
        opt(r.ass_a()),
        opt(r.ass_pr()),
        opt(r.ass_re()),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Direction;
    use crate::trackmodel::FrameGrid;

    #[test]
    fn perfect_predictions_row() {
        let grid = FrameGrid::new(0.1, 20).unwrap();
        let mut gt = TrackSet::new(grid);
        for f in 0..20 {
            gt.insert("a", f, Direction::from_degrees(10.0, 0.0)).unwrap();
            if f % 2 == 0 {
                gt.insert("b", f, Direction::from_degrees(-70.0, 5.0)).unwrap();
            }
        }
        let before = gt.clone();
        let r = evaluate(&gt, &gt, &EvalConfig::default()).unwrap();
        assert_eq!(gt, before);
        assert_eq!(r.tsr, 0.0);
        assert_eq!(r.tfr, 0.0);
        assert_eq!(r.mota, Some(1.0));
        assert_eq!(r.ass_a(), Some(1.0));
        assert_eq!(r.ass_pr(), Some(1.0));
        assert_eq!(r.ass_re(), Some(1.0));
        assert_eq!(
            scene_csv_row("s", &r),
            "s,30,0,0,0.000000,0.000000,0,1.000000,0.000000,0.000000,1.000000,1.000000,1.000000"
        );
    }

    #[test]
    fn empty_predictions_leave_undefined_cells() {
        let grid = FrameGrid::new(0.1, 5).unwrap();
        let mut gt = TrackSet::new(grid);
        gt.insert("a", 0, Direction::from_degrees(0.0, 0.0)).unwrap();
        let r = evaluate(&TrackSet::new(grid), &gt, &EvalConfig::default()).unwrap();
        assert_eq!(r.mota, Some(0.0));
        assert!(r.assoc.is_none());
        assert!(scene_csv_row("s", &r).ends_with(",,,,"));
    }
}
