//! Robustness evaluation: box-noise injection and R40 average precision.
//!
//! Difficulty follows the KITTI occlusion/truncation buckets without the
//! image-height criterion; a range gate takes its place. Levels are
//! cumulative: a Moderate evaluation counts Easy and Moderate objects and
//! treats Hard ones as "don't care".

use std::fmt::Write as _;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::frame::{is_vehicle, DetectionFrame, GroundTruth, Prediction};
use crate::geometry::{Box3D, Point};
use crate::loss::{bev_iou, iou3d};
use crate::rng::SeededRng;

pub const DEFAULT_IOU_THRESHOLD: f64 = 0.7;
pub const RECALL_POSITIONS: usize = 40;
/// Horizontal growth of each box face for noise placement (m).
pub const DEFAULT_NOISE_DILATION: f64 = 0.25;
/// The noise levels used for robustness sweeps.
pub const NOISE_LEVELS: [u32; 4] = [0, 20, 50, 100];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvalError {
    #[error("invalid label: occlusion {occlusion}, truncation {truncation}")]
    InvalidLabel { occlusion: i32, truncation: f64 },
    #[error("no evaluable vehicle ground truth")]
    NoGroundTruth,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseProtocolParams {
    pub k_prime: u32,
    pub dilation: f64,
}

impl NoiseProtocolParams {
    pub fn new(k_prime: u32) -> Self {
        Self {
            k_prime,
            dilation: DEFAULT_NOISE_DILATION,
        }
    }
}

/// Noise region of a ground-truth box: grown horizontally on every side.
pub fn noise_region(b: &Box3D, dilation: f64) -> Box3D {
    b.dilated([2.0 * dilation, 2.0 * dilation, 0.0])
        .expect("dilation keeps dimensions positive")
}

/// Adds `k ~ U{0..k′}` uniform points to the dilated region of every
/// ground-truth box; existing points are untouched.
pub fn inject_noise(frame: &DetectionFrame, params: &NoiseProtocolParams, rng: &mut SeededRng) -> DetectionFrame {
    let mut out = frame.clone();
    if params.k_prime == 0 {
        return out;
    }
    for gt in &frame.gt {
        let region = noise_region(&gt.bbox, params.dilation);
        let k = rng.random_range(0..=params.k_prime);
        let [l, w, h] = region.dims();
        for _ in 0..k {
            let local = [
                l * (rng.unit() - 0.5),
                w * (rng.unit() - 0.5),
                h * (rng.unit() - 0.5),
            ];
            out.cloud.points.push(Point::at(region.to_world(local), rng.unit()));
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Difficulty {
    Easy,
    Moderate,
    Hard,
}

impl Difficulty {
    pub const ALL: [Difficulty; 3] = [Difficulty::Easy, Difficulty::Moderate, Difficulty::Hard];

    pub fn name(self) -> &'static str {
        match self {
            Difficulty::Easy => "easy",
            Difficulty::Moderate => "moderate",
            Difficulty::Hard => "hard",
        }
    }
}

/// Difficulty of a ground-truth object; `None` means ignored at every level.
pub fn assign_difficulty(gt: &GroundTruth, range_gate: f64) -> Result<Option<Difficulty>, EvalError> {
    let (occ, trunc) = (gt.occlusion, gt.truncation);
    if !(0..=3).contains(&occ) || !(0.0..=1.0).contains(&trunc) {
        return Err(EvalError::InvalidLabel {
            occlusion: occ,
            truncation: trunc,
        });
    }
    let c = gt.bbox.center();
    if c[0].hypot(c[1]) > range_gate {
        return Ok(None);
    }
    Ok(if occ == 0 && trunc <= 0.15 {
        Some(Difficulty::Easy)
    } else if occ <= 1 && trunc <= 0.30 {
        Some(Difficulty::Moderate)
    } else if occ <= 2 && trunc <= 0.50 {
        Some(Difficulty::Hard)
    } else {
        None
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Metric {
    Bev,
    ThreeD,
}

impl Metric {
    pub fn name(self) -> &'static str {
        match self {
            Metric::Bev => "bev",
            Metric::ThreeD => "3d",
        }
    }

    pub fn iou(self, a: &Box3D, b: &Box3D) -> f64 {
        match self {
            Metric::Bev => bev_iou(a, b),
            Metric::ThreeD => iou3d(a, b),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalConfig {
    pub iou_threshold: f64,
    pub metric: Metric,
    pub recall_positions: usize,
    /// Objects whose horizontal distance from the sensor exceeds this are ignored.
    pub range_gate: f64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            iou_threshold: DEFAULT_IOU_THRESHOLD,
            metric: Metric::ThreeD,
            recall_positions: RECALL_POSITIONS,
            range_gate: f64::INFINITY,
        }
    }
}

impl EvalConfig {
    pub fn with_metric(metric: Metric) -> Self {
        Self {
            metric,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Outcome {
    TruePositive,
    FalsePositive,
    /// Matched a don't-care object or not a vehicle: neither TP nor FP.
    Ignored,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Matching {
    /// Outcome per prediction, in input order.
    pub outcomes: Vec<Outcome>,
    /// Whether each ground truth counts at this level.
    pub gt_valid: Vec<bool>,
    /// Whether each ground truth was matched by a true positive.
    pub gt_matched: Vec<bool>,
}

impl Matching {
    pub fn tp(&self) -> usize {
        self.outcomes.iter().filter(|o| **o == Outcome::TruePositive).count()
    }

    pub fn fp(&self) -> usize {
        self.outcomes.iter().filter(|o| **o == Outcome::FalsePositive).count()
    }

    pub fn fn_count(&self) -> usize {
        self.gt_valid
            .iter()
            .zip(&self.gt_matched)
            .filter(|(v, m)| **v && !**m)
            .count()
    }
}

/// Score-ordered greedy matching of vehicle predictions to vehicle ground
/// truth at one difficulty level.
///
/// Each prediction, highest score first (input order on ties), takes the
/// unmatched valid object with the highest IoU at or above the threshold.
/// Failing that, overlapping a don't-care object makes it `Ignored`;
/// otherwise it is a false positive.
pub fn match_detections(
    preds: &[Prediction],
    gts: &[GroundTruth],
    config: &EvalConfig,
    level: Difficulty,
) -> Result<Matching, EvalError> {
    let mut gt_valid = vec![false; gts.len()];
    let mut dont_care = vec![false; gts.len()];
    for (i, g) in gts.iter().enumerate() {
        if !g.is_vehicle() {
            continue;
        }
        match assign_difficulty(g, config.range_gate)? {
            Some(d) if d <= level => gt_valid[i] = true,
            _ => dont_care[i] = true,
        }
    }

    let mut order: Vec<usize> = (0..preds.len()).collect();
    order.sort_by(|&a, &b| preds[b].score.total_cmp(&preds[a].score));

    let mut outcomes = vec![Outcome::Ignored; preds.len()];
    let mut gt_matched = vec![false; gts.len()];
    for &p in &order {
        if !is_vehicle(&preds[p].class) {
            continue;
        }
        let mut best: Option<(usize, f64)> = None;
        let mut overlaps_dont_care = false;
        for (g, gt) in gts.iter().enumerate() {
            if !(gt_valid[g] || dont_care[g]) {
                continue;
            }
            let iou = config.metric.iou(&preds[p].bbox, &gt.bbox);
            if iou < config.iou_threshold {
                continue;
            }
            if dont_care[g] {
                overlaps_dont_care = true;
            } else if !gt_matched[g] && best.is_none_or(|(_, b)| iou > b) {
                best = Some((g, iou));
            }
        }
        outcomes[p] = match best {
            Some((g, _)) => {
                gt_matched[g] = true;
                Outcome::TruePositive
            }
            None if overlaps_dont_care => Outcome::Ignored,
            None => Outcome::FalsePositive,
        };
    }
    Ok(Matching {
        outcomes,
        gt_valid,
        gt_matched,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LevelResult {
    /// Average precision in percent.
    pub ap: f64,
    pub tp: usize,
    pub fp: usize,
    pub fn_count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct APResult {
    pub metric: Metric,
    pub easy: LevelResult,
    pub moderate: LevelResult,
    pub hard: LevelResult,
}

impl APResult {
    pub fn level(&self, d: Difficulty) -> &LevelResult {
        match d {
            Difficulty::Easy => &self.easy,
            Difficulty::Moderate => &self.moderate,
            Difficulty::Hard => &self.hard,
        }
    }
}

/// Interpolated AP (percent) from score-ranked `(score, is_tp)` pairs.
///
/// The precision/recall curve has one point per distinct score threshold;
/// AP averages, over recall positions `i/R` for `i = 1..=R`, the best
/// precision reached at a recall of at least `i/R`.
pub fn interpolated_ap(ranked: &[(f64, bool)], n_gt: usize, positions: usize) -> f64 {
    if n_gt == 0 || positions == 0 {
        return 0.0;
    }
    let mut curve: Vec<(usize, f64)> = Vec::new();
    let (mut tp, mut seen) = (0usize, 0usize);
    for (k, &(score, hit)) in ranked.iter().enumerate() {
        seen += 1;
        tp += usize::from(hit);
        let group_ends = ranked.get(k + 1).is_none_or(|next| next.0 != score);
        if group_ends {
            curve.push((tp, tp as f64 / seen as f64));
        }
    }
    let total: f64 = (1..=positions)
        .map(|i| {
            curve
                .iter()
                .filter(|(tp, _)| tp * positions >= i * n_gt)
                .map(|(_, p)| *p)
                .fold(0.0, f64::max)
        })
        .sum();
    100.0 * total / positions as f64
}

/// R40 average precision over a set of frames, for every difficulty.
pub fn average_precision_r40(
    frames: &[(Vec<Prediction>, Vec<GroundTruth>)],
    config: &EvalConfig,
) -> Result<APResult, EvalError> {
    let mut levels = Vec::with_capacity(3);
    for level in Difficulty::ALL {
        let mut ranked: Vec<(f64, bool)> = Vec::new();
        let (mut n_gt, mut tp, mut fp, mut fn_count) = (0, 0, 0, 0);
        for (preds, gts) in frames {
            let m = match_detections(preds, gts, config, level)?;
            n_gt += m.gt_valid.iter().filter(|v| **v).count();
            tp += m.tp();
            fp += m.fp();
            fn_count += m.fn_count();
            ranked.extend(preds.iter().zip(&m.outcomes).filter_map(|(p, o)| match o {
                Outcome::TruePositive => Some((p.score, true)),
                Outcome::FalsePositive => Some((p.score, false)),
                Outcome::Ignored => None,
            }));
        }
        if level == Difficulty::Hard && n_gt == 0 {
            return Err(EvalError::NoGroundTruth);
        }
        // stable: equal scores keep frame-then-input order
        ranked.sort_by(|a, b| b.0.total_cmp(&a.0));
        levels.push(LevelResult {
            ap: interpolated_ap(&ranked, n_gt, config.recall_positions),
            tp,
            fp,
            fn_count,
        });
    }
    Ok(APResult {
        metric: config.metric,
        easy: levels[0],
        moderate: levels[1],
        hard: levels[2],
    })
}

/// Delimited result table, one row per metric × difficulty.
pub fn format_table(results: &[APResult], config: &EvalConfig) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "# iou_threshold={} recall_positions={} class=vehicle difficulty=kitti-occlusion-truncation range_gate={}",
        config.iou_threshold, config.recall_positions, config.range_gate
    );
    out.push_str("metric,difficulty,ap,tp,fp,fn\n");
    for r in results {
        for d in Difficulty::ALL {
            let l = r.level(d);
            let _ = writeln!(out, "{},{},{:.2},{},{},{}", r.metric.name(), d.name(), l.ap, l.tp, l.fp, l.fn_count);
        }
    }
    out
}
