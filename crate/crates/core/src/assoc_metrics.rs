//! Global association metrics: TPA/FPA/FNA per matched id couple and the
//! resulting AssRe, AssPr and AssA, averaged over true positives.
//!
//! For a couple c = (pred, gt) seen in at least one TP:
//!
//! * TPA(c): TPs with exactly that couple,
//! * FPA(c): TPs with the same pred but another gt, plus FPs carrying the pred,
//! * FNA(c): TPs with the same gt but another pred, plus FNs carrying the gt.
//!
//! Counting runs over the whole scene, not per frame or segment.

use std::collections::{BTreeMap, HashMap};

use crate::error::{Error, Result};
use crate::matching::MatchSequence;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct CoupleCounts {
    pub tpa: u64,
    pub fpa: u64,
    pub fna: u64,
    /// Number of TPs carrying this couple; always equal to `tpa`.
    pub multiplicity: u64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct AssociationCounts {
    /// Keyed by (pred_id, gt_id).
    pub couples: BTreeMap<(String, String), CoupleCounts>,
}

impl AssociationCounts {
    pub fn n_tp(&self) -> u64 {
        self.couples.values().map(|c| c.multiplicity).sum()
    }

    /// TP-weighted mean of the ratio `num / den` returned by `ratio` per
    /// couple. Each term is formed as `(multiplicity · num) / den` so that
    /// balanced splits come out exact.
    fn tp_mean(&self, ratio: impl Fn(&CoupleCounts) -> (u64, u64)) -> Result<f64> {
        let n_tp = self.n_tp();
        if n_tp == 0 {
            return Err(Error::UndefinedOnEmptyTp);
        }
        let sum: f64 = self
            .couples
            .values()
            .map(|c| {
                let (num, den) = ratio(c);
                (c.multiplicity * num) as f64 / den as f64
            })
            .sum();
        Ok(sum / n_tp as f64)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AssociationScores {
    pub ass_re: f64,
    pub ass_pr: f64,
    pub ass_a: f64,
}

pub fn count_associations(ms: &MatchSequence) -> AssociationCounts {
    let mut couple_tp: HashMap<(&str, &str), u64> = HashMap::new();
    let mut pred_tp: HashMap<&str, u64> = HashMap::new();
    let mut gt_tp: HashMap<&str, u64> = HashMap::new();
    let mut pred_fp: HashMap<&str, u64> = HashMap::new();
    let mut gt_fn: HashMap<&str, u64> = HashMap::new();

    for frame in &ms.frames {
        for tp in &frame.tps {
            *couple_tp.entry((&tp.pred_id, &tp.gt_id)).or_default() += 1;
            *pred_tp.entry(&tp.pred_id).or_default() += 1;
            *gt_tp.entry(&tp.gt_id).or_default() += 1;
        }
        for fp in &frame.fps {
            *pred_fp.entry(fp).or_default() += 1;
        }
        for fnn in &frame.fns {
            *gt_fn.entry(fnn).or_default() += 1;
        }
    }

    let couples = couple_tp
        .into_iter()
        .map(|((pred, gt), tpa)| {
            let fpa = pred_tp[pred] - tpa + pred_fp.get(pred).copied().unwrap_or(0);
            let fna = gt_tp[gt] - tpa + gt_fn.get(gt).copied().unwrap_or(0);
            (
                (pred.to_owned(), gt.to_owned()),
                CoupleCounts {
                    tpa,
                    fpa,
                    fna,
                    multiplicity: tpa,
                },
            )
        })
        .collect();
    AssociationCounts { couples }
}

pub fn ass_re(counts: &AssociationCounts) -> Result<f64> {
    counts.tp_mean(|c| (c.tpa, c.tpa + c.fna))
}

pub fn ass_pr(counts: &AssociationCounts) -> Result<f64> {
    counts.tp_mean(|c| (c.tpa, c.tpa + c.fpa))
}

pub fn ass_a(counts: &AssociationCounts) -> Result<f64> {
    counts.tp_mean(|c| (c.tpa, c.tpa + c.fna + c.fpa))
}

/// All three scores, or `None` when the scene has no TP.
pub fn scores(counts: &AssociationCounts) -> Option<AssociationScores> {
    Some(AssociationScores {
        ass_re: ass_re(counts).ok()?,
        ass_pr: ass_pr(counts).ok()?,
        ass_a: ass_a(counts).ok()?,
    })
}
