//! Object-detection baselines: IoU, mean IoU, greedy-matched F1, COCO-style
//! average precision, and Spearman rank correlation.
//!
//! All overlaps are computed on rasterized masks so boxes and polygons are
//! treated the same way as in the COTe metrics.

use serde::{Deserialize, Serialize};

use crate::error::{CoteError, Result};
use crate::mask::PixelMask;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Iou {
    pub value: f64,
    /// Both masks were empty; `value` is 0 by convention.
    pub union_empty: bool,
}

pub fn iou(a: &PixelMask, b: &PixelMask) -> Result<Iou> {
    let inter = a.intersect_area(b)?;
    let union = a.area() + b.area() - inter;
    Ok(if union == 0 {
        Iou {
            value: 0.0,
            union_empty: true,
        }
    } else {
        Iou {
            value: inter as f64 / union as f64,
            union_empty: false,
        }
    })
}

/// Pairwise IoU between ground-truth regions (rows) and predictions (columns).
#[derive(Debug, Clone, PartialEq)]
pub struct IouMatrix {
    gt_ids: Vec<String>,
    pred_ids: Vec<String>,
    values: Vec<f64>,
}

impl IouMatrix {
    pub fn compute<'a, G, P>(gt: G, preds: P) -> Result<Self>
    where
        G: IntoIterator<Item = (&'a str, &'a PixelMask)>,
        P: IntoIterator<Item = (&'a str, &'a PixelMask)>,
    {
        let gt: Vec<_> = gt.into_iter().collect();
        let preds: Vec<_> = preds.into_iter().collect();
        let mut values = Vec::with_capacity(gt.len() * preds.len());
        for (_, g) in &gt {
            let g_area = g.area();
            for (_, p) in &preds {
                let inter = g.intersect_area(p)?;
                let union = g_area + p.area() - inter;
                values.push(if union == 0 { 0.0 } else { inter as f64 / union as f64 });
            }
        }
        Ok(IouMatrix {
            gt_ids: gt.iter().map(|(id, _)| id.to_string()).collect(),
            pred_ids: preds.iter().map(|(id, _)| id.to_string()).collect(),
            values,
        })
    }

    /// Builds a matrix from precomputed row-major values.
    pub fn from_values(gt_ids: Vec<String>, pred_ids: Vec<String>, values: Vec<f64>) -> Self {
        assert_eq!(values.len(), gt_ids.len() * pred_ids.len());
        IouMatrix {
            gt_ids,
            pred_ids,
            values,
        }
    }

    pub fn gt_count(&self) -> usize {
        self.gt_ids.len()
    }

    pub fn pred_count(&self) -> usize {
        self.pred_ids.len()
    }

    pub fn get(&self, gt: usize, pred: usize) -> f64 {
        self.values[gt * self.pred_ids.len() + pred]
    }
}

/// Mean over ground-truth regions of their best IoU with any prediction;
/// undetected regions contribute 0.
pub fn mean_iou(ious: &IouMatrix) -> Result<f64> {
    if ious.gt_count() == 0 {
        return Err(CoteError::Undefined("mean IoU of an empty ground truth"));
    }
    let sum: f64 = (0..ious.gt_count())
        .map(|g| (0..ious.pred_count()).map(|p| ious.get(g, p)).fold(0.0, f64::max))
        .sum();
    Ok(sum / ious.gt_count() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchedPair {
    pub gt_id: String,
    pub pred_id: String,
    pub iou: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchResult {
    pub true_positives: usize,
    pub false_positives: usize,
    pub false_negatives: usize,
    pub pairs: Vec<MatchedPair>,
    pub threshold: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

/// Precision, recall and F1 from match counts. Empty denominators give 0.
pub fn precision_recall_f1(tp: usize, fp: usize, fn_: usize) -> (f64, f64, f64) {
    let div = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
    let p = div(tp, tp + fp);
    let r = div(tp, tp + fn_);
    let f1 = if p + r == 0.0 { 0.0 } else { 2.0 * p * r / (p + r) };
    (p, r, f1)
}

/// Greedy one-to-one matching: candidate pairs with IoU at or above
/// `threshold` are accepted in order of decreasing IoU (ties by ground-truth
/// index, then prediction index) when both sides are still free.
pub fn greedy_f1(ious: &IouMatrix, threshold: f64) -> MatchResult {
    let mut candidates: Vec<(usize, usize, f64)> = (0..ious.gt_count())
        .flat_map(|g| (0..ious.pred_count()).map(move |p| (g, p)))
        .map(|(g, p)| (g, p, ious.get(g, p)))
        .filter(|&(_, _, v)| v >= threshold && v > 0.0)
        .collect();
    candidates.sort_by(|a, b| b.2.total_cmp(&a.2).then(a.0.cmp(&b.0)).then(a.1.cmp(&b.1)));
    let mut gt_used = vec![false; ious.gt_count()];
    let mut pred_used = vec![false; ious.pred_count()];
    let mut pairs = Vec::new();
    for (g, p, v) in candidates {
        if gt_used[g] || pred_used[p] {
            continue;
        }
        gt_used[g] = true;
        pred_used[p] = true;
        pairs.push(MatchedPair {
            gt_id: ious.gt_ids[g].clone(),
            pred_id: ious.pred_ids[p].clone(),
            iou: v,
        });
    }
    let tp = pairs.len();
    let fp = ious.pred_count() - tp;
    let fn_ = ious.gt_count() - tp;
    let (precision, recall, f1) = precision_recall_f1(tp, fp, fn_);
    MatchResult {
        true_positives: tp,
        false_positives: fp,
        false_negatives: fn_,
        pairs,
        threshold,
        precision,
        recall,
        f1,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub recall: f64,
    pub precision: f64,
    pub score_threshold: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApResult {
    pub thresholds: Vec<f64>,
    pub ap: Vec<f64>,
    /// Mean of `ap` over thresholds.
    pub map: f64,
    pub curves: Vec<Vec<CurvePoint>>,
}

/// IoU thresholds 0.50, 0.55, ..., 0.95.
pub fn coco_iou_thresholds() -> Vec<f64> {
    (0..10).map(|i| (50 + 5 * i) as f64 / 100.0).collect()
}

const RECALL_POINTS: usize = 101;

/// Single-class COCO-style average precision with 101-point interpolation.
pub fn average_precision(ious: &IouMatrix, scores: &[Option<f64>], thresholds: &[f64]) -> Result<ApResult> {
    assert_eq!(scores.len(), ious.pred_count());
    if ious.gt_count() == 0 {
        return Err(CoteError::Undefined("average precision without ground truth"));
    }
    let scores = scores
        .iter()
        .enumerate()
        .map(|(j, s)| s.ok_or_else(|| CoteError::MissingScore(ious.pred_ids[j].clone())))
        .collect::<Result<Vec<f64>>>()?;
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));

    let gt_count = ious.gt_count();
    let mut ap = Vec::with_capacity(thresholds.len());
    let mut curves = Vec::with_capacity(thresholds.len());
    for &t in thresholds {
        let mut gt_used = vec![false; gt_count];
        let mut tp = 0usize;
        let mut curve = Vec::with_capacity(order.len());
        for (rank, &d) in order.iter().enumerate() {
            let mut best: Option<(usize, f64)> = None;
            for (g, used) in gt_used.iter().enumerate() {
                let v = ious.get(g, d);
                if !used && v >= t && v > 0.0 && best.is_none_or(|(_, b)| v > b) {
                    best = Some((g, v));
                }
            }
            if let Some((g, _)) = best {
                gt_used[g] = true;
                tp += 1;
            }
            curve.push(CurvePoint {
                recall: tp as f64 / gt_count as f64,
                precision: tp as f64 / (rank + 1) as f64,
                score_threshold: scores[d],
            });
        }
        ap.push(interpolated_ap(&curve));
        curves.push(curve);
    }
    let map = if ap.is_empty() {
        0.0
    } else {
        ap.iter().sum::<f64>() / ap.len() as f64
    };
    Ok(ApResult {
        thresholds: thresholds.to_vec(),
        ap,
        map,
        curves,
    })
}

fn interpolated_ap(curve: &[CurvePoint]) -> f64 {
    // Precision envelope: running maximum from the right.
    let mut envelope: Vec<f64> = curve.iter().map(|c| c.precision).collect();
    for i in (1..envelope.len()).rev() {
        envelope[i - 1] = envelope[i - 1].max(envelope[i]);
    }
    let mut sum = 0.0;
    let mut k = 0;
    for r in 0..RECALL_POINTS {
        let level = r as f64 / (RECALL_POINTS - 1) as f64;
        while k < curve.len() && curve[k].recall < level {
            k += 1;
        }
        if k < curve.len() {
            sum += envelope[k];
        }
    }
    sum / RECALL_POINTS as f64
}

/// Fractional ranks starting at 1; ties share their average rank.
fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let rank = (i + j) as f64 / 2.0 + 1.0;
        for &idx in &order[i..=j] {
            ranks[idx] = rank;
        }
        i = j + 1;
    }
    ranks
}

/// Pearson correlation of average ranks.
pub fn spearman_correlation(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() || x.len() < 2 {
        return Err(CoteError::Undefined(
            "Spearman correlation needs two equal-length samples of size >= 2",
        ));
    }
    let rx = average_ranks(x);
    let ry = average_ranks(y);
    let n = rx.len() as f64;
    let mx = rx.iter().sum::<f64>() / n;
    let my = ry.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in rx.iter().zip(&ry) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(CoteError::Undefined("Spearman correlation of a constant sample"));
    }
    Ok((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}
