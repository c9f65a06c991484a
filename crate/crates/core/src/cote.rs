//! Prediction-to-SSU assignment and the Coverage, Overlap, Trespass and
//! Excess scores of a single page.
//!
//! All four quantities are ratios of exact pixel counts. The integer
//! numerators are kept alongside the floating point values so results can be
//! compared exactly against an independent recomputation.

use serde::{Deserialize, Serialize};

use crate::error::{CoteError, Result};
use crate::geometry::RegionGeometry;
use crate::mask::{self, PageCanvas, PixelMask};
use crate::ssu::{ClassId, LabelledPage};

/// A predicted region with its rasterized mask.
#[derive(Debug, Clone)]
pub struct Prediction {
    pub id: String,
    pub geometry: RegionGeometry,
    pub class_id: ClassId,
    pub score: Option<f64>,
    mask: PixelMask,
}

impl Prediction {
    pub fn new(
        id: impl Into<String>,
        geometry: RegionGeometry,
        class_id: ClassId,
        score: Option<f64>,
        canvas: PageCanvas,
    ) -> Result<Self> {
        let id = id.into();
        if let Some(s) = score {
            if !(0.0..=1.0).contains(&s) {
                return Err(CoteError::ScoreOutOfRange { id, score: s });
            }
        }
        let mask = geometry.rasterize(canvas);
        Ok(Prediction {
            id,
            geometry,
            class_id,
            score,
            mask,
        })
    }

    pub fn mask(&self) -> &PixelMask {
        &self.mask
    }
}

/// Which SSU, if any, each prediction is assigned to. Indexed like the
/// prediction slice it was computed from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AssignmentMap {
    ids: Vec<String>,
    ssu_of: Vec<Option<usize>>,
}

impl AssignmentMap {
    pub fn len(&self) -> usize {
        self.ssu_of.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ssu_of.is_empty()
    }

    /// SSU index of the prediction at position `j`.
    pub fn ssu_of(&self, j: usize) -> Option<usize> {
        self.ssu_of[j]
    }

    pub fn as_slice(&self) -> &[Option<usize>] {
        &self.ssu_of
    }

    pub fn assigned(&self) -> impl Iterator<Item = (&str, usize)> {
        self.ids
            .iter()
            .zip(&self.ssu_of)
            .filter_map(|(id, s)| s.map(|s| (id.as_str(), s)))
    }

    pub fn unassigned_ids(&self) -> impl Iterator<Item = &str> {
        self.ids
            .iter()
            .zip(&self.ssu_of)
            .filter(|(_, s)| s.is_none())
            .map(|(id, _)| id.as_str())
    }

    pub fn n_assigned(&self) -> usize {
        self.ssu_of.iter().flatten().count()
    }
}

/// Assigns every prediction to the SSU it intersects most. Ties go to the
/// lowest SSU index; predictions touching no SSU stay unassigned.
pub fn assign_predictions(page: &LabelledPage, preds: &[Prediction]) -> Result<AssignmentMap> {
    let mut ssu_of = Vec::with_capacity(preds.len());
    for p in preds {
        page.canvas().ensure_same(&p.mask.canvas())?;
        let mut best: Option<(usize, u64)> = None;
        for (i, ssu) in page.ssus().iter().enumerate() {
            let area = p.mask.intersect_area(&ssu.mask)?;
            if area > 0 && best.is_none_or(|(_, b)| area > b) {
                best = Some((i, area));
            }
        }
        ssu_of.push(best.map(|(i, _)| i));
    }
    Ok(AssignmentMap {
        ids: preds.iter().map(|p| p.id.clone()).collect(),
        ssu_of,
    })
}

/// Relative weights of the composite score.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoteWeights {
    pub coverage: f64,
    pub overlap: f64,
    pub trespass: f64,
}

impl Default for CoteWeights {
    fn default() -> Self {
        CoteWeights {
            coverage: 1.0,
            overlap: 1.0,
            trespass: 1.0,
        }
    }
}

/// Exact pixel counts behind a [`CoteResult`].
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PixelCounts {
    /// Total SSU area.
    pub gt_area: u64,
    /// Page area outside every SSU.
    pub negative_area: u64,
    /// SSU pixels covered by at least one prediction.
    pub covered: u64,
    /// Sum of `multiplicity - 1` over covered SSU pixels.
    pub overlap: u64,
    /// Sum over predictions of their area on SSUs other than their own.
    pub trespass: u64,
    /// Non-SSU pixels covered by at least one prediction.
    pub excess: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionScores {
    pub id: String,
    pub ssu: Option<usize>,
    pub trespass: f64,
    pub excess: f64,
    pub trespass_px: u64,
    pub excess_px: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoteResult {
    pub cote: f64,
    pub coverage: f64,
    pub overlap: f64,
    pub trespass: f64,
    pub excess: f64,
    /// False when the SSUs cover the whole page, leaving no negative space.
    pub excess_defined: bool,
    pub n_assigned: usize,
    pub n_total: usize,
    pub per_prediction: Vec<PredictionScores>,
    /// Covered fraction of each SSU; `None` for SSUs with no pixels.
    pub per_ssu_coverage: Vec<Option<f64>>,
    pub weights: CoteWeights,
    pub counts: PixelCounts,
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

fn nonempty_gt(page: &LabelledPage) -> Result<u64> {
    match page.gt_area() {
        0 => Err(CoteError::EmptyGroundTruth),
        a => Ok(a),
    }
}

fn assigned_masks<'a>(preds: &'a [Prediction], assignment: &'a AssignmentMap) -> impl Iterator<Item = &'a PixelMask> {
    preds
        .iter()
        .zip(assignment.as_slice())
        .filter(|(_, s)| s.is_some())
        .map(|(p, _)| &p.mask)
}

/// Covered SSU area over total SSU area.
pub fn coverage(page: &LabelledPage, preds: &[Prediction], assignment: &AssignmentMap) -> Result<f64> {
    let gt = nonempty_gt(page)?;
    Ok(ratio(covered_px(page, preds, assignment)?, gt))
}

fn covered_px(page: &LabelledPage, preds: &[Prediction], assignment: &AssignmentMap) -> Result<u64> {
    let covered = mask::union(page.canvas(), assigned_masks(preds, assignment))?;
    page.composite_mask().intersect_area(&covered)
}

/// Stacked-prediction excess inside the SSUs over total SSU area.
pub fn overlap(page: &LabelledPage, preds: &[Prediction], assignment: &AssignmentMap) -> Result<f64> {
    let gt = nonempty_gt(page)?;
    Ok(ratio(overlap_px(page, preds, assignment)?, gt))
}

fn overlap_px(page: &LabelledPage, preds: &[Prediction], assignment: &AssignmentMap) -> Result<u64> {
    let stacked = mask::stack(page.canvas(), assigned_masks(preds, assignment))?;
    stacked.multiplicity_excess_area(page.composite_mask())
}

/// Per-prediction area on SSUs other than the assigned one.
fn trespass_px(page: &LabelledPage, preds: &[Prediction], assignment: &AssignmentMap) -> Result<Vec<u64>> {
    preds
        .iter()
        .zip(assignment.as_slice())
        .map(|(p, ssu)| match ssu {
            None => Ok(0),
            Some(i) => {
                // SSUs are disjoint: foreign area = area on all SSUs - area on own SSU.
                let on_gt = page.composite_mask().intersect_area(&p.mask)?;
                let on_own = page.ssus()[*i].mask.intersect_area(&p.mask)?;
                Ok(on_gt - on_own)
            }
        })
        .collect()
}

/// Total trespass and each prediction's share `t_j`.
pub fn trespass(page: &LabelledPage, preds: &[Prediction], assignment: &AssignmentMap) -> Result<(f64, Vec<f64>)> {
    let gt = nonempty_gt(page)?;
    let per = trespass_px(page, preds, assignment)?;
    let total = per.iter().sum();
    Ok((ratio(total, gt), per.into_iter().map(|t| ratio(t, gt)).collect()))
}

/// Predicted area outside every SSU over the total non-SSU area, for all
/// predictions together and for each one individually. Returns zeros when
/// the SSUs cover the whole page.
pub fn excess(page: &LabelledPage, preds: &[Prediction]) -> Result<(f64, Vec<f64>)> {
    let (total, per) = excess_px(page, preds)?;
    let neg = page.negative_area();
    Ok((ratio(total, neg), per.into_iter().map(|e| ratio(e, neg)).collect()))
}

fn excess_px(page: &LabelledPage, preds: &[Prediction]) -> Result<(u64, Vec<u64>)> {
    let negative = page.composite_mask().complement();
    let all = mask::union(page.canvas(), preds.iter().map(|p| &p.mask))?;
    let total = negative.intersect_area(&all)?;
    let per = preds
        .iter()
        .map(|p| negative.intersect_area(&p.mask))
        .collect::<Result<Vec<_>>>()?;
    Ok((total, per))
}

/// Assigns predictions and computes the full decomposition.
pub fn cote_score(page: &LabelledPage, preds: &[Prediction], weights: CoteWeights) -> Result<CoteResult> {
    let assignment = assign_predictions(page, preds)?;
    cote_score_with_assignment(page, preds, &assignment, weights)
}

pub fn cote_score_with_assignment(
    page: &LabelledPage,
    preds: &[Prediction],
    assignment: &AssignmentMap,
    weights: CoteWeights,
) -> Result<CoteResult> {
    let gt_area = nonempty_gt(page)?;
    let negative_area = page.negative_area();
    let covered = covered_px(page, preds, assignment)?;
    let overlap = overlap_px(page, preds, assignment)?;
    let per_trespass = trespass_px(page, preds, assignment)?;
    let trespass: u64 = per_trespass.iter().sum();
    let (excess, per_excess) = excess_px(page, preds)?;

    let all_preds = mask::union(page.canvas(), preds.iter().map(|p| &p.mask))?;
    let per_ssu_coverage = page
        .ssus()
        .iter()
        .map(|s| match s.mask.area() {
            0 => Ok(None),
            area => Ok(Some(ratio(s.mask.intersect_area(&all_preds)?, area))),
        })
        .collect::<Result<Vec<_>>>()?;

    let per_prediction = preds
        .iter()
        .enumerate()
        .map(|(j, p)| PredictionScores {
            id: p.id.clone(),
            ssu: assignment.ssu_of(j),
            trespass: ratio(per_trespass[j], gt_area),
            excess: ratio(per_excess[j], negative_area),
            trespass_px: per_trespass[j],
            excess_px: per_excess[j],
        })
        .collect();

    let c = ratio(covered, gt_area);
    let o = ratio(overlap, gt_area);
    let t = ratio(trespass, gt_area);
    Ok(CoteResult {
        cote: weights.coverage * c - weights.overlap * o - weights.trespass * t,
        coverage: c,
        overlap: o,
        trespass: t,
        excess: ratio(excess, negative_area),
        excess_defined: negative_area > 0,
        n_assigned: assignment.n_assigned(),
        n_total: preds.len(),
        per_prediction,
        per_ssu_coverage,
        weights,
        counts: PixelCounts {
            gt_area,
            negative_area,
            covered,
            overlap,
            trespass,
            excess,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ssu::{group_regions_into_ssus, GroundTruthRegion, OverlapPolicy};

    fn canvas() -> PageCanvas {
        PageCanvas::new(100, 100).unwrap()
    }

    fn page(boxes: &[(f64, f64, f64, f64)]) -> LabelledPage {
        let regions: Vec<_> = boxes
            .iter()
            .enumerate()
            .map(|(i, &(x0, y0, x1, y1))| {
                GroundTruthRegion::new(format!("g{i}"), RegionGeometry::bbox(x0, y0, x1, y1), 1, i as u32)
            })
            .collect();
        group_regions_into_ssus(&regions, canvas(), OverlapPolicy::Strict).unwrap()
    }

    fn pred(id: &str, x0: f64, y0: f64, x1: f64, y1: f64) -> Prediction {
        Prediction::new(id, RegionGeometry::bbox(x0, y0, x1, y1), 1, Some(1.0), canvas()).unwrap()
    }

    #[test]
    fn assignment_argmax_tie_and_unassigned() {
        let p = page(&[
            (0.0, 0.0, 10.0, 10.0),
            (10.0, 0.0, 20.0, 10.0),
            (0.0, 20.0, 50.0, 30.0),
            (0.0, 40.0, 50.0, 50.0),
        ]);
        let preds = vec![
            pred("inside3", 5.0, 42.0, 20.0, 48.0),
            pred("straddle", 4.0, 0.0, 14.0, 10.0), // 60 px on SSU 0, 40 px on SSU 1
            pred("tie", 5.0, 0.0, 15.0, 10.0),
            pred("margin", 70.0, 70.0, 90.0, 90.0),
        ];
        let a = assign_predictions(&p, &preds).unwrap();
        assert_eq!(a.as_slice(), &[Some(3), Some(0), Some(0), None]);
        assert_eq!(a.unassigned_ids().collect::<Vec<_>>(), vec!["margin"]);
        assert_eq!(a.n_assigned(), 3);
    }

    #[test]
    fn coverage_half() {
        let p = page(&[(0.0, 0.0, 50.0, 100.0)]);
        let preds = vec![pred("p", 0.0, 0.0, 25.0, 100.0)];
        let a = assign_predictions(&p, &preds).unwrap();
        assert_eq!(coverage(&p, &preds, &a).unwrap(), 0.5);
    }

    #[test]
    fn overlap_of_duplicate_layer() {
        let p = page(&[(0.0, 0.0, 10.0, 10.0), (20.0, 0.0, 30.0, 10.0)]);
        let preds = vec![pred("a", 0.0, 0.0, 10.0, 10.0), pred("b", 0.0, 0.0, 10.0, 10.0)];
        let a = assign_predictions(&p, &preds).unwrap();
        assert_eq!(overlap(&p, &preds, &a).unwrap(), 0.5);
    }

    #[test]
    fn trespass_definition() {
        // SSU 0: 40x10 = 400 px, SSU 1: 40x10 = 400 px, A^S = 800.
        let p = page(&[(0.0, 0.0, 40.0, 10.0), (0.0, 10.0, 40.0, 20.0)]);
        // 400 px on SSU 0 plus 80 px (8 columns x 10 rows) on SSU 1.
        let l_shape = [
            [0.0, 0.0],
            [40.0, 0.0],
            [40.0, 10.0],
            [8.0, 10.0],
            [8.0, 20.0],
            [0.0, 20.0],
        ];
        let intruder = vec![Prediction::new("a", RegionGeometry::polygon(l_shape), 1, None, canvas()).unwrap()];
        let a = assign_predictions(&p, &intruder).unwrap();
        let (total, per) = trespass(&p, &intruder, &a).unwrap();
        assert_eq!(per, vec![0.1]);
        assert_eq!(total, 0.1);

        let preds = vec![pred("a", 0.0, 0.0, 40.0, 10.0), pred("b", 0.0, 10.0, 8.0, 20.0)];
        let a = assign_predictions(&p, &preds).unwrap();
        assert_eq!(trespass(&p, &preds, &a).unwrap().0, 0.0);
    }

    #[test]
    fn empty_ground_truth_is_an_error() {
        let p = page(&[]);
        let err = cote_score(&p, &[], CoteWeights::default()).unwrap_err();
        assert!(matches!(err, CoteError::EmptyGroundTruth));
    }

    #[test]
    fn no_predictions_scores_zero() {
        let p = page(&[(0.0, 0.0, 10.0, 10.0)]);
        let r = cote_score(&p, &[], CoteWeights::default()).unwrap();
        assert_eq!(
            (r.cote, r.coverage, r.overlap, r.trespass, r.excess),
            (0.0, 0.0, 0.0, 0.0, 0.0)
        );
        assert_eq!(r.n_total, 0);
    }

    #[test]
    fn perfect_predictions() {
        let boxes = [(0.0, 0.0, 10.0, 10.0), (20.0, 20.0, 50.0, 40.0)];
        let p = page(&boxes);
        let preds: Vec<_> = boxes.iter().map(|&(a, b, c, d)| pred("p", a, b, c, d)).collect();
        let r = cote_score(&p, &preds, CoteWeights::default()).unwrap();
        assert_eq!(
            (r.cote, r.coverage, r.overlap, r.trespass, r.excess),
            (1.0, 1.0, 0.0, 0.0, 0.0)
        );
        assert_eq!(r.per_ssu_coverage, vec![Some(1.0), Some(1.0)]);
    }

    #[test]
    fn full_page_box() {
        let p = page(&[
            (0.0, 0.0, 10.0, 10.0),
            (20.0, 20.0, 50.0, 40.0),
            (60.0, 60.0, 70.0, 90.0),
        ]);
        let preds = vec![pred("page", 0.0, 0.0, 100.0, 100.0)];
        let r = cote_score(&p, &preds, CoteWeights::default()).unwrap();
        assert_eq!(r.coverage, 1.0);
        assert_eq!(r.excess, 1.0);
        assert_eq!(r.overlap, 0.0);
        assert_eq!(r.per_prediction[0].ssu, Some(1));
        assert_eq!(r.counts.trespass, r.counts.gt_area - 600);
    }

    #[test]
    fn weights_scale_components() {
        let p = page(&[(0.0, 0.0, 10.0, 10.0), (20.0, 0.0, 30.0, 10.0)]);
        let preds = vec![pred("a", 0.0, 0.0, 10.0, 10.0), pred("b", 0.0, 0.0, 10.0, 10.0)];
        let w = CoteWeights {
            coverage: 2.0,
            overlap: 0.5,
            trespass: 1.0,
        };
        let r = cote_score(&p, &preds, w).unwrap();
        assert_eq!(r.cote, 2.0 * 0.5 - 0.5 * 0.5);
    }

    #[test]
    fn out_of_range_score() {
        let err = Prediction::new("x", RegionGeometry::bbox(0.0, 0.0, 1.0, 1.0), 1, Some(1.5), canvas()).unwrap_err();
        assert!(matches!(err, CoteError::ScoreOutOfRange { .. }));
    }
}
