//! Per-class decomposition of Coverage, Overlap and Trespass, and the three
//! prediction-perspective confusion matrices.
//!
//! Values whose normalizer is zero are reported as `None` rather than 0.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::cote::{AssignmentMap, CoteResult, Prediction};
use crate::error::{CoteError, Result};
use crate::mask::{self, CountMask, PixelMask};
use crate::ssu::{ClassId, LabelledPage};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Share {
    pub numerator: u64,
    pub value: Option<f64>,
}

impl Share {
    fn new(numerator: u64, denominator: u64) -> Self {
        Share {
            numerator,
            value: (denominator > 0).then(|| numerator as f64 / denominator as f64),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShareDenominators {
    pub coverage: u64,
    pub overlap: u64,
    pub trespass: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassShares {
    pub coverage: BTreeMap<ClassId, Share>,
    pub overlap: BTreeMap<ClassId, Share>,
    pub trespass: BTreeMap<ClassId, Share>,
    /// Pixel counts `C*A^S`, `O*A^S` and `T*A^S`.
    pub denominators: ShareDenominators,
}

/// K x K matrix with prediction classes as rows and ground-truth classes as
/// columns, both ordered like [`ConfusionMatrices::classes`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassMatrix {
    pub numerators: Vec<Vec<u64>>,
    pub normalizers: Vec<u64>,
    /// Normalized rows; `None` where the row normalizer is zero.
    pub rows: Vec<Option<Vec<f64>>>,
}

impl ClassMatrix {
    fn new(numerators: Vec<Vec<u64>>, normalizers: Vec<u64>) -> Self {
        let rows = numerators
            .iter()
            .zip(&normalizers)
            .map(|(row, &n)| (n > 0).then(|| row.iter().map(|&v| v as f64 / n as f64).collect()))
            .collect();
        ClassMatrix {
            numerators,
            normalizers,
            rows,
        }
    }

    pub fn get(&self, row: usize, col: usize) -> Option<f64> {
        self.rows[row].as_ref().map(|r| r[col])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfusionMatrices {
    pub classes: Vec<ClassId>,
    pub coverage: ClassMatrix,
    pub overlap: ClassMatrix,
    pub trespass: ClassMatrix,
}

impl ConfusionMatrices {
    pub fn class_index(&self, class: ClassId) -> Option<usize> {
        self.classes.iter().position(|&c| c == class)
    }
}

struct ClassMasks {
    classes: Vec<ClassId>,
    /// Union of SSU masks per class.
    gt: Vec<PixelMask>,
    /// Union of prediction masks per class.
    pred: Vec<PixelMask>,
    stacked: CountMask,
}

impl ClassMasks {
    fn build(page: &LabelledPage, preds: &[Prediction], assignment: &AssignmentMap) -> Result<Self> {
        for s in page.ssus() {
            if s.class_id == 0 {
                return Err(CoteError::MissingClass {
                    kind: "ssu",
                    id: s.index.to_string(),
                });
            }
        }
        for p in preds {
            if p.class_id == 0 {
                return Err(CoteError::MissingClass {
                    kind: "prediction",
                    id: p.id.clone(),
                });
            }
        }
        let classes: Vec<ClassId> = page
            .ssus()
            .iter()
            .map(|s| s.class_id)
            .chain(preds.iter().map(|p| p.class_id))
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        let canvas = page.canvas();
        let gt = classes
            .iter()
            .map(|&k| mask::union(canvas, page.ssus().iter().filter(|s| s.class_id == k).map(|s| &s.mask)))
            .collect::<Result<Vec<_>>>()?;
        let pred = classes
            .iter()
            .map(|&k| mask::union(canvas, preds.iter().filter(|p| p.class_id == k).map(|p| p.mask())))
            .collect::<Result<Vec<_>>>()?;
        let stacked = mask::stack(
            canvas,
            preds
                .iter()
                .zip(assignment.as_slice())
                .filter(|(_, s)| s.is_some())
                .map(|(p, _)| p.mask()),
        )?;
        Ok(ClassMasks {
            classes,
            gt,
            pred,
            stacked,
        })
    }
}

/// Fraction of each metric attributable to each prediction class.
pub fn class_shares(
    page: &LabelledPage,
    preds: &[Prediction],
    assignment: &AssignmentMap,
    cote: &CoteResult,
) -> Result<ClassShares> {
    let masks = ClassMasks::build(page, preds, assignment)?;
    let denominators = ShareDenominators {
        coverage: cote.counts.covered,
        overlap: cote.counts.overlap,
        trespass: cote.counts.trespass,
    };
    let mut shares = ClassShares {
        coverage: BTreeMap::new(),
        overlap: BTreeMap::new(),
        trespass: BTreeMap::new(),
        denominators,
    };
    for (ci, &k) in masks.classes.iter().enumerate() {
        let on_gt = page.composite_mask().intersect(&masks.pred[ci])?;
        let coverage = on_gt.area();
        let overlap = masks.stacked.multiplicity_excess_area(&on_gt)?;
        let trespass = preds
            .iter()
            .zip(&cote.per_prediction)
            .filter(|(p, _)| p.class_id == k)
            .map(|(_, s)| s.trespass_px)
            .sum();
        shares.coverage.insert(k, Share::new(coverage, denominators.coverage));
        shares.overlap.insert(k, Share::new(overlap, denominators.overlap));
        shares.trespass.insert(k, Share::new(trespass, denominators.trespass));
    }
    Ok(shares)
}

/// Coverage, Overlap and Trespass confusion matrices, each row normalized
/// by a per-prediction-class area.
pub fn confusion_matrices(
    page: &LabelledPage,
    preds: &[Prediction],
    assignment: &AssignmentMap,
) -> Result<ConfusionMatrices> {
    let masks = ClassMasks::build(page, preds, assignment)?;
    let k_count = masks.classes.len();
    let index = |class: ClassId| masks.classes.iter().position(|&c| c == class).expect("class collected");

    let mut coverage = vec![vec![0u64; k_count]; k_count];
    let mut overlap = vec![vec![0u64; k_count]; k_count];
    let mut trespass = vec![vec![0u64; k_count]; k_count];
    let mut pred_area = vec![0u64; k_count];
    let mut overlap_area = vec![0u64; k_count];

    for k in 0..k_count {
        pred_area[k] = masks.pred[k].area();
        let on_gt = page.composite_mask().intersect(&masks.pred[k])?;
        overlap_area[k] = masks.stacked.multiplicity_excess_area(&on_gt)?;
        for l in 0..k_count {
            coverage[k][l] = masks.gt[l].intersect_area(&masks.pred[k])?;
            overlap[k][l] = masks
                .stacked
                .multiplicity_excess_area(&on_gt.intersect(&masks.pred[l])?)?;
        }
    }

    for (j, p) in preds.iter().enumerate() {
        let Some(own) = assignment.ssu_of(j) else {
            continue;
        };
        let own = &page.ssus()[own];
        let k = index(p.class_id);
        let own_class = index(own.class_id);
        let on_own = own.mask.intersect_area(p.mask())?;
        for (l, cell) in trespass[k].iter_mut().enumerate() {
            let mut area = masks.gt[l].intersect_area(p.mask())?;
            if l == own_class {
                area -= on_own;
            }
            *cell += area;
        }
    }

    Ok(ConfusionMatrices {
        coverage: ClassMatrix::new(coverage, pred_area.clone()),
        overlap: ClassMatrix::new(overlap, overlap_area),
        trespass: ClassMatrix::new(trespass, pred_area),
        classes: masks.classes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cote::{assign_predictions, cote_score_with_assignment, CoteWeights};
    use crate::geometry::RegionGeometry;
    use crate::mask::PageCanvas;
    use crate::ssu::{group_regions_into_ssus, GroundTruthRegion, OverlapPolicy};

    fn canvas() -> PageCanvas {
        PageCanvas::new(100, 100).unwrap()
    }

    fn page(boxes: &[(f64, f64, f64, f64, ClassId)]) -> LabelledPage {
        let regions: Vec<_> = boxes
            .iter()
            .enumerate()
            .map(|(i, &(x0, y0, x1, y1, k))| {
                GroundTruthRegion::new(format!("g{i}"), RegionGeometry::bbox(x0, y0, x1, y1), k, i as u32)
            })
            .collect();
        group_regions_into_ssus(&regions, canvas(), OverlapPolicy::Strict).unwrap()
    }

    fn pred(id: &str, x0: f64, y0: f64, x1: f64, y1: f64, k: ClassId) -> Prediction {
        Prediction::new(id, RegionGeometry::bbox(x0, y0, x1, y1), k, None, canvas()).unwrap()
    }

    fn run(p: &LabelledPage, preds: &[Prediction]) -> (ClassShares, ConfusionMatrices, CoteResult) {
        let a = assign_predictions(p, preds).unwrap();
        let r = cote_score_with_assignment(p, preds, &a, CoteWeights::default()).unwrap();
        (
            class_shares(p, preds, &a, &r).unwrap(),
            confusion_matrices(p, preds, &a).unwrap(),
            r,
        )
    }

    #[test]
    fn single_class_share_is_one() {
        let p = page(&[(0.0, 0.0, 20.0, 20.0, 1)]);
        let (shares, cm, r) = run(&p, &[pred("a", 0.0, 0.0, 10.0, 20.0, 1)]);
        assert_eq!(shares.coverage[&1].value, Some(1.0));
        assert_eq!(shares.overlap[&1].value, None);
        assert_eq!(cm.coverage.get(0, 0), Some(r.coverage * 400.0 / 200.0));
    }

    #[test]
    fn perfect_same_class_is_diagonal() {
        let p = page(&[(0.0, 0.0, 20.0, 20.0, 1), (30.0, 0.0, 60.0, 20.0, 2)]);
        let preds = [pred("a", 0.0, 0.0, 20.0, 20.0, 1), pred("b", 30.0, 0.0, 60.0, 20.0, 2)];
        let (shares, cm, _) = run(&p, &preds);
        assert_eq!(cm.coverage.rows, vec![Some(vec![1.0, 0.0]), Some(vec![0.0, 1.0])]);
        let total: f64 = shares.coverage.values().filter_map(|s| s.value).sum();
        assert!((total - 1.0).abs() < 1e-12);
        assert_eq!(cm.overlap.rows, vec![None, None]);
    }

    #[test]
    fn within_class_trespass_on_diagonal() {
        // Two class-1 SSUs; the prediction belongs to A but covers 40 px of B.
        let p = page(&[(0.0, 0.0, 20.0, 10.0, 1), (0.0, 10.0, 20.0, 20.0, 1)]);
        let preds = [pred("a", 0.0, 0.0, 20.0, 12.0, 1)];
        let (_, cm, r) = run(&p, &preds);
        assert_eq!(cm.trespass.numerators, vec![vec![40]]);
        assert!(cm.trespass.get(0, 0).unwrap() > 0.0);
        assert_eq!(cm.trespass.numerators[0][0], r.counts.trespass);
    }

    #[test]
    fn cross_class_overlap() {
        let p = page(&[(0.0, 0.0, 20.0, 20.0, 1)]);
        let preds = [pred("a", 0.0, 0.0, 20.0, 20.0, 1), pred("b", 0.0, 0.0, 10.0, 20.0, 2)];
        let (shares, cm, r) = run(&p, &preds);
        assert_eq!(r.counts.overlap, 200);
        // Class 1 covers all 400 px, class 2 the stacked 200.
        assert_eq!(shares.overlap[&1].numerator, 200);
        assert_eq!(shares.overlap[&2].numerator, 200);
        assert_eq!(cm.overlap.numerators, vec![vec![200, 200], vec![200, 200]]);
        assert_eq!(cm.overlap.normalizers, vec![200, 200]);
    }

    #[test]
    fn zero_class_is_rejected() {
        let p = page(&[(0.0, 0.0, 20.0, 20.0, 1)]);
        let preds = [pred("zero", 0.0, 0.0, 20.0, 20.0, 0)];
        let a = assign_predictions(&p, &preds).unwrap();
        let err = confusion_matrices(&p, &preds, &a).unwrap_err();
        assert!(matches!(err, CoteError::MissingClass { kind: "prediction", .. }));
    }
}
