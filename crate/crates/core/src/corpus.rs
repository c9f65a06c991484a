//! Multi-page evaluation: per-page COTe and baselines, macro aggregation,
//! IoU/COTe rank correlation and labelled-vs-unlabelled SSU comparison.

use std::collections::BTreeSet;
use std::path::PathBuf;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baseline::{self, ApResult, IouMatrix, MatchResult};
use crate::cote::{self, CoteResult, CoteWeights, Prediction};
use crate::error::{CoteError, Result};
use crate::io::{self, DatasetManifest, GtFormat, GtPage, PredictionSet};
use crate::multiclass::{self, ClassShares, ConfusionMatrices};
use crate::ssu::{self, AutoLabelConfig, ClassMap, GroundTruthRegion, LabelledPage, OverlapPolicy};

/// How ground-truth regions become SSUs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "kebab-case")]
pub enum SsuMode {
    /// Group by the structural and semantic ids stored with the regions.
    UseLabels,
    /// Ignore stored ids: every region is its own SSU.
    FallbackPerRegion,
    /// Derive ids from header positions and columns first.
    AutoLabel(AutoLabelConfig),
}

impl SsuMode {
    pub fn name(&self) -> &'static str {
        match self {
            SsuMode::UseLabels => "use-labels",
            SsuMode::FallbackPerRegion => "fallback-per-region",
            SsuMode::AutoLabel(_) => "auto-label",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Aggregation {
    MacroMean,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BaselineToggles {
    pub iou: bool,
    pub f1: bool,
    pub map: bool,
}

impl Default for BaselineToggles {
    fn default() -> Self {
        BaselineToggles {
            iou: true,
            f1: true,
            map: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub gt_path: Option<PathBuf>,
    pub gt_format: GtFormat,
    pub predictions_path: Option<PathBuf>,
    pub ssu_mode: SsuMode,
    /// Predictions scoring below this are dropped. Records without a score
    /// are always kept.
    pub score_threshold: f64,
    pub weights: CoteWeights,
    pub overlap_policy: OverlapPolicy,
    pub baselines: BaselineToggles,
    pub f1_iou_threshold: f64,
    pub aggregation: Aggregation,
    /// Worker threads; `None` uses the rayon default. Never affects results.
    #[serde(skip)]
    pub jobs: Option<usize>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            gt_path: None,
            gt_format: GtFormat::SsuJson,
            predictions_path: None,
            ssu_mode: SsuMode::UseLabels,
            score_threshold: 0.0,
            weights: CoteWeights::default(),
            overlap_policy: OverlapPolicy::default(),
            baselines: BaselineToggles::default(),
            f1_iou_threshold: 0.5,
            aggregation: Aggregation::MacroMean,
            jobs: None,
        }
    }
}

impl RunConfig {
    fn validate(&self) -> Result<()> {
        let w = self.weights;
        if ![w.coverage, w.overlap, w.trespass].iter().all(|v| v.is_finite()) {
            return Err(CoteError::InvalidLayout("COTe weights must be finite".into()));
        }
        if !(0.0..=1.0).contains(&self.score_threshold) {
            return Err(CoteError::InvalidLayout(format!(
                "score threshold {} outside [0, 1]",
                self.score_threshold
            )));
        }
        Ok(())
    }
}

/// Metrics of one evaluated page.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PageResult {
    pub image_id: String,
    pub n_regions: usize,
    pub n_ssus: usize,
    pub n_predictions: usize,
    pub cote: CoteResult,
    pub mean_iou: Option<f64>,
    pub f1: Option<MatchResult>,
    pub ap: Option<ApResult>,
    pub shares: ClassShares,
    pub confusion: ConfusionMatrices,
    pub warnings: Vec<String>,
}

/// Macro means over evaluated pages. Baseline means cover only the pages
/// where the baseline was computed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateRow {
    pub n_pages: usize,
    pub n_skipped: usize,
    pub cote: f64,
    pub coverage: f64,
    pub overlap: f64,
    pub trespass: f64,
    pub excess: f64,
    pub mean_iou: Option<f64>,
    pub f1: Option<f64>,
    pub map: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpearmanOutcome {
    pub n: usize,
    pub value: Option<f64>,
    /// Why `value` is missing.
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusResult {
    pub pages: Vec<PageResult>,
    pub aggregate: AggregateRow,
    pub spearman_iou_cote: SpearmanOutcome,
    pub warnings: Vec<String>,
    pub config: RunConfig,
}

/// Builds the SSU view of one page under `mode`.
pub fn label_page(page: &GtPage, classes: &ClassMap, mode: &SsuMode, policy: OverlapPolicy) -> Result<LabelledPage> {
    let regions: Vec<GroundTruthRegion> = match mode {
        SsuMode::UseLabels => page.regions.clone(),
        SsuMode::FallbackPerRegion => page.regions.iter().map(GroundTruthRegion::without_units).collect(),
        SsuMode::AutoLabel(cfg) => ssu::autolabel_ssu_from_structure(&page.regions, classes, cfg)?,
    };
    ssu::group_regions_into_ssus(&regions, page.canvas, policy)
}

/// Evaluates one page. Returns `Ok(None)` for pages whose SSUs have no area.
pub fn evaluate_page(
    page: &GtPage,
    classes: &ClassMap,
    records: &[io::PredictionRecord],
    config: &RunConfig,
) -> Result<Option<PageResult>> {
    let labelled = label_page(page, classes, &config.ssu_mode, config.overlap_policy)?;
    if labelled.gt_area() == 0 {
        return Ok(None);
    }
    let mut warnings = Vec::new();
    if labelled.clipped_pixels() > 0 {
        warnings.push(format!(
            "{} overlapping SSU pixels assigned to the earlier SSU",
            labelled.clipped_pixels()
        ));
    }
    let preds = records
        .iter()
        .filter(|r| r.score.is_none_or(|s| s >= config.score_threshold))
        .map(|r| r.to_prediction(page.canvas))
        .collect::<Result<Vec<Prediction>>>()?;

    let assignment = cote::assign_predictions(&labelled, &preds)?;
    let cote = cote::cote_score_with_assignment(&labelled, &preds, &assignment, config.weights)?;
    let shares = multiclass::class_shares(&labelled, &preds, &assignment, &cote)?;
    let confusion = multiclass::confusion_matrices(&labelled, &preds, &assignment)?;

    let b = config.baselines;
    let (mut mean_iou, mut f1, mut ap) = (None, None, None);
    if (b.iou || b.f1 || b.map) && !page.regions.is_empty() {
        let gt_masks: Vec<_> = page.regions.iter().map(|r| r.geometry.rasterize(page.canvas)).collect();
        let ious = IouMatrix::compute(
            page.regions.iter().map(|r| r.id.as_str()).zip(&gt_masks),
            preds.iter().map(|p| (p.id.as_str(), p.mask())),
        )?;
        if b.iou {
            mean_iou = Some(baseline::mean_iou(&ious)?);
        }
        if b.f1 {
            f1 = Some(baseline::greedy_f1(&ious, config.f1_iou_threshold));
        }
        if b.map {
            let scores: Vec<Option<f64>> = preds.iter().map(|p| p.score).collect();
            match baseline::average_precision(&ious, &scores, &baseline::coco_iou_thresholds()) {
                Ok(r) => ap = Some(r),
                Err(CoteError::MissingScore(id)) => {
                    warnings.push(format!("mAP skipped: prediction {id:?} has no score"));
                }
                Err(e) => return Err(e),
            }
        }
    }

    Ok(Some(PageResult {
        image_id: page.image_id.clone(),
        n_regions: page.regions.len(),
        n_ssus: labelled.ssus().len(),
        n_predictions: preds.len(),
        cote,
        mean_iou,
        f1,
        ap,
        shares,
        confusion,
        warnings,
    }))
}

fn mean(values: impl Iterator<Item = f64>) -> Option<f64> {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    (n > 0).then(|| sum / n as f64)
}

/// Macro mean of the page rows.
pub fn aggregate(pages: &[PageResult], n_skipped: usize) -> AggregateRow {
    let m = |f: fn(&PageResult) -> f64| mean(pages.iter().map(f)).unwrap_or(0.0);
    AggregateRow {
        n_pages: pages.len(),
        n_skipped,
        cote: m(|p| p.cote.cote),
        coverage: m(|p| p.cote.coverage),
        overlap: m(|p| p.cote.overlap),
        trespass: m(|p| p.cote.trespass),
        excess: m(|p| p.cote.excess),
        mean_iou: mean(pages.iter().filter_map(|p| p.mean_iou)),
        f1: mean(pages.iter().filter_map(|p| p.f1.as_ref().map(|f| f.f1))),
        map: mean(pages.iter().filter_map(|p| p.ap.as_ref().map(|a| a.map))),
    }
}

fn spearman_outcome(pages: &[PageResult]) -> SpearmanOutcome {
    let (iou, cote): (Vec<f64>, Vec<f64>) = pages
        .iter()
        .filter_map(|p| p.mean_iou.map(|i| (i, p.cote.cote)))
        .unzip();
    match baseline::spearman_correlation(&iou, &cote) {
        Ok(v) => SpearmanOutcome {
            n: iou.len(),
            value: Some(v),
            note: None,
        },
        Err(e) => SpearmanOutcome {
            n: iou.len(),
            value: None,
            note: Some(e.to_string()),
        },
    }
}

/// Evaluates an in-memory dataset. Pages are processed in parallel and
/// returned sorted by image id.
pub fn evaluate_dataset(manifest: &DatasetManifest, preds: &PredictionSet, config: &RunConfig) -> Result<CorpusResult> {
    config.validate()?;
    let known: BTreeSet<&str> = manifest.pages.iter().map(|p| p.image_id.as_str()).collect();
    let unknown: Vec<String> = preds
        .by_image
        .keys()
        .filter(|id| !known.contains(id.as_str()))
        .cloned()
        .collect();
    if !unknown.is_empty() {
        return Err(CoteError::UnknownImageIds(unknown));
    }

    let run = || -> Result<Vec<(String, Option<PageResult>)>> {
        manifest
            .pages
            .par_iter()
            .map(|page| {
                let r = evaluate_page(page, &manifest.classes, preds.for_image(&page.image_id), config)?;
                Ok((page.image_id.clone(), r))
            })
            .collect()
    };
    let mut outcomes = match config.jobs {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build()
            .map_err(|e| CoteError::InvalidLayout(format!("thread pool: {e}")))?
            .install(run)?,
        None => run()?,
    };
    outcomes.sort_by(|a, b| a.0.cmp(&b.0));

    let mut warnings: Vec<String> = manifest.warnings.iter().chain(&preds.warnings).cloned().collect();
    let mut pages = Vec::new();
    let mut skipped = 0;
    for (id, outcome) in outcomes {
        match outcome {
            Some(p) => {
                warnings.extend(p.warnings.iter().map(|w| format!("{id}: {w}")));
                pages.push(p);
            }
            None => {
                skipped += 1;
                warnings.push(format!("{id}: skipped, ground truth has zero area"));
            }
        }
    }
    if pages.is_empty() {
        return Err(CoteError::NoEvaluablePages);
    }
    let aggregate = aggregate(&pages, skipped);
    let spearman_iou_cote = spearman_outcome(&pages);
    Ok(CorpusResult {
        pages,
        aggregate,
        spearman_iou_cote,
        warnings,
        config: config.clone(),
    })
}

fn load(config: &RunConfig) -> Result<(DatasetManifest, PredictionSet)> {
    let gt = config
        .gt_path
        .as_deref()
        .ok_or_else(|| CoteError::InvalidLayout("no ground-truth path configured".into()))?;
    let pr = config
        .predictions_path
        .as_deref()
        .ok_or_else(|| CoteError::InvalidLayout("no predictions path configured".into()))?;
    Ok((
        io::load_ground_truth(gt, config.gt_format)?,
        io::coco::read_coco_predictions(pr)?,
    ))
}

/// Loads the configured files and evaluates them.
pub fn evaluate_corpus(config: &RunConfig) -> Result<CorpusResult> {
    let (manifest, preds) = load(config)?;
    evaluate_dataset(&manifest, &preds, config)
}

/// `fallback - labelled` for each aggregate metric.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricDeltas {
    pub cote: f64,
    pub coverage: f64,
    pub overlap: f64,
    pub trespass: f64,
    pub excess: f64,
}

impl MetricDeltas {
    fn between(labelled: &CoteResult, fallback: &CoteResult) -> Self {
        MetricDeltas {
            cote: fallback.cote - labelled.cote,
            coverage: fallback.coverage - labelled.coverage,
            overlap: fallback.overlap - labelled.overlap,
            trespass: fallback.trespass - labelled.trespass,
            excess: fallback.excess - labelled.excess,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SsuComparison {
    pub labelled: CorpusResult,
    pub fallback: CorpusResult,
    pub aggregate_deltas: MetricDeltas,
    pub page_deltas: Vec<(String, MetricDeltas)>,
}

/// Runs the same predictions with stored SSU labels and with one SSU per
/// region.
pub fn compare_ssu_modes_dataset(
    manifest: &DatasetManifest,
    preds: &PredictionSet,
    config: &RunConfig,
) -> Result<SsuComparison> {
    let with_mode = |mode: SsuMode| RunConfig {
        ssu_mode: mode,
        ..config.clone()
    };
    let labelled = evaluate_dataset(manifest, preds, &with_mode(SsuMode::UseLabels))?;
    let fallback = evaluate_dataset(manifest, preds, &with_mode(SsuMode::FallbackPerRegion))?;
    let page_deltas = labelled
        .pages
        .iter()
        .zip(&fallback.pages)
        .map(|(l, f)| (l.image_id.clone(), MetricDeltas::between(&l.cote, &f.cote)))
        .collect();
    let (la, fa) = (&labelled.aggregate, &fallback.aggregate);
    let aggregate_deltas = MetricDeltas {
        cote: fa.cote - la.cote,
        coverage: fa.coverage - la.coverage,
        overlap: fa.overlap - la.overlap,
        trespass: fa.trespass - la.trespass,
        excess: fa.excess - la.excess,
    };
    Ok(SsuComparison {
        labelled,
        fallback,
        aggregate_deltas,
        page_deltas,
    })
}

pub fn compare_ssu_modes(config: &RunConfig) -> Result<SsuComparison> {
    let (manifest, preds) = load(config)?;
    compare_ssu_modes_dataset(&manifest, &preds, config)
}
