//! COCO-style ground truth and detection results.
//!
//! Boxes are `[x, y, w, h]` with a top-left origin and convert to
//! `(x, y, x + w, y + h)`. Ground-truth annotations may carry an optional
//! `ssu` object with `structural_id`, `semantic_id` and `reading_order`.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::{
    infer_canvas, read_to_string, write_bytes, DatasetManifest, GtFormat, GtPage, PredictionRecord, PredictionSet,
};
use crate::error::{CoteError, Result};
use crate::geometry::RegionGeometry;
use crate::mask::PageCanvas;
use crate::ssu::{ClassId, ClassMap, GroundTruthRegion};

/// COCO ids may be numbers or strings; both map to the same string id.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CocoId {
    Int(i64),
    Str(String),
}

impl CocoId {
    pub fn as_string(&self) -> String {
        match self {
            CocoId::Int(i) => i.to_string(),
            CocoId::Str(s) => s.clone(),
        }
    }

    fn from_string(s: &str) -> Self {
        s.parse()
            .map(CocoId::Int)
            .unwrap_or_else(|_| CocoId::Str(s.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct CocoImage {
    id: CocoId,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    width: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    height: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    file_name: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SsuFields {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub structural_id: Option<i64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub semantic_id: Option<i64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reading_order: Option<u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct CocoAnnotation {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    id: Option<CocoId>,
    image_id: CocoId,
    category_id: ClassId,
    bbox: [f64; 4],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    segmentation: Option<Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    ssu: Option<SsuFields>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct CocoCategory {
    id: ClassId,
    name: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct CocoGt {
    images: Vec<CocoImage>,
    annotations: Vec<CocoAnnotation>,
    #[serde(default)]
    categories: Vec<CocoCategory>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct CocoResult {
    image_id: CocoId,
    category_id: ClassId,
    bbox: [f64; 4],
    #[serde(default)]
    score: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    segmentation: Option<Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    id: Option<CocoId>,
}

/// `[x, y, w, h]` to a box; negative sizes are rejected.
pub fn bbox_to_geometry(bbox: [f64; 4]) -> Option<RegionGeometry> {
    let [x, y, w, h] = bbox;
    (w >= 0.0 && h >= 0.0).then(|| RegionGeometry::bbox(x, y, x + w, y + h))
}

/// Axis-aligned `[x, y, w, h]` of a geometry.
pub fn geometry_to_bbox(g: &RegionGeometry) -> [f64; 4] {
    match g {
        RegionGeometry::Box { x0, y0, x1, y1 } => [*x0, *y0, x1 - x0, y1 - y0],
        RegionGeometry::Polygon { .. } => {
            let (x0, y0, x1, y1) = g.bounds().unwrap_or_default();
            [x0, y0, x1 - x0, y1 - y0]
        }
    }
}

/// First polygon of a COCO polygon-list segmentation. RLE segmentations and
/// extra polygons are reported through `warn`.
fn segmentation_polygon(seg: &Value, mut warn: impl FnMut(String)) -> Option<RegionGeometry> {
    let polys = seg.as_array()?;
    let first = polys.first()?.as_array()?;
    if polys.len() > 1 {
        warn(format!(
            "{} polygons in segmentation; only the first is used",
            polys.len()
        ));
    }
    let coords: Vec<f64> = first.iter().filter_map(Value::as_f64).collect();
    if coords.len() < 6 || !coords.len().is_multiple_of(2) {
        warn("segmentation polygon has fewer than 3 points; bbox used".to_string());
        return None;
    }
    Some(RegionGeometry::polygon(coords.chunks_exact(2).map(|c| [c[0], c[1]])))
}

fn region_geometry(
    index: usize,
    bbox: [f64; 4],
    seg: Option<&Value>,
    path: &Path,
    warnings: &mut Vec<String>,
) -> Result<RegionGeometry> {
    let from_box = bbox_to_geometry(bbox)
        .ok_or_else(|| CoteError::parse(path, format!("record {index}: negative bbox width or height {bbox:?}")))?;
    let Some(seg) = seg else {
        return Ok(from_box);
    };
    if seg.is_object() {
        warnings.push(format!("record {index}: RLE segmentation ignored; bbox used"));
        return Ok(from_box);
    }
    Ok(segmentation_polygon(seg, |w| warnings.push(format!("record {index}: {w}"))).unwrap_or(from_box))
}

pub fn read_coco_gt(path: &Path) -> Result<DatasetManifest> {
    let text = read_to_string(path)?;
    let gt: CocoGt = serde_json::from_str(&text).map_err(|e| CoteError::parse(path, e.to_string()))?;
    let mut warnings = Vec::new();

    let mut classes = ClassMap::new();
    for c in &gt.categories {
        classes.insert(c.id, c.name.clone());
    }

    let mut by_image: BTreeMap<String, Vec<(usize, &CocoAnnotation)>> = BTreeMap::new();
    for (i, a) in gt.annotations.iter().enumerate() {
        let image = a.image_id.as_string();
        if !gt.images.iter().any(|im| im.id.as_string() == image) {
            return Err(CoteError::parse(
                path,
                format!("annotation {i} references missing image {image:?}"),
            ));
        }
        if classes.name_of(a.category_id).is_none() {
            warnings.push(format!("annotation {i}: category {} not declared", a.category_id));
            classes.insert(a.category_id, format!("class_{}", a.category_id));
        }
        by_image.entry(image).or_default().push((i, a));
    }

    let mut pages = Vec::with_capacity(gt.images.len());
    for image in &gt.images {
        let image_id = image.id.as_string();
        let anns = by_image.remove(&image_id).unwrap_or_default();
        let explicit_order = anns
            .iter()
            .all(|(_, a)| a.ssu.as_ref().is_some_and(|s| s.reading_order.is_some()));
        if !explicit_order
            && anns
                .iter()
                .any(|(_, a)| a.ssu.as_ref().is_some_and(|s| s.reading_order.is_some()))
        {
            warnings.push(format!(
                "image {image_id:?}: partial reading_order ignored; annotation order used"
            ));
        }
        let mut regions = Vec::with_capacity(anns.len());
        for (pos, (i, a)) in anns.iter().enumerate() {
            let geometry = region_geometry(*i, a.bbox, a.segmentation.as_ref(), path, &mut warnings)?;
            let ssu = a.ssu.as_ref();
            regions.push(GroundTruthRegion {
                id: a.id.as_ref().map_or_else(|| format!("ann{i}"), CocoId::as_string),
                geometry,
                class_id: a.category_id,
                structural_id: ssu.and_then(|s| s.structural_id),
                semantic_id: ssu.and_then(|s| s.semantic_id),
                reading_order: if explicit_order {
                    ssu.and_then(|s| s.reading_order).unwrap_or_default()
                } else {
                    pos as u32
                },
            });
        }
        let canvas = match (image.width, image.height) {
            (Some(w), Some(h)) if w > 0 && h > 0 => PageCanvas::new(w, h)?,
            _ => {
                warnings.push(format!("image {image_id:?}: size missing; inferred from region extent"));
                infer_canvas(regions.iter().map(|r| &r.geometry))?
            }
        };
        pages.push(GtPage {
            image_id,
            canvas,
            regions,
            source: Some(path.to_path_buf()),
        });
    }

    Ok(DatasetManifest {
        format: GtFormat::CocoGt,
        classes,
        pages,
        warnings,
    })
}

fn polygon_segmentation(g: &RegionGeometry) -> Option<Value> {
    match g {
        RegionGeometry::Polygon { points } => {
            let flat: Vec<f64> = points.iter().flatten().copied().collect();
            Some(serde_json::json!([flat]))
        }
        RegionGeometry::Box { .. } => None,
    }
}

/// Writes ground truth as COCO JSON, including SSU fields.
pub fn write_coco_gt(manifest: &DatasetManifest, path: &Path) -> Result<()> {
    let images = manifest
        .pages
        .iter()
        .map(|p| CocoImage {
            id: CocoId::from_string(&p.image_id),
            width: Some(p.canvas.width()),
            height: Some(p.canvas.height()),
            file_name: None,
        })
        .collect();
    let annotations = manifest
        .pages
        .iter()
        .flat_map(|p| {
            p.regions.iter().map(|r| CocoAnnotation {
                id: Some(CocoId::from_string(&r.id)),
                image_id: CocoId::from_string(&p.image_id),
                category_id: r.class_id,
                bbox: geometry_to_bbox(&r.geometry),
                segmentation: polygon_segmentation(&r.geometry),
                ssu: Some(SsuFields {
                    structural_id: r.structural_id,
                    semantic_id: r.semantic_id,
                    reading_order: Some(r.reading_order),
                }),
            })
        })
        .collect();
    let categories = manifest
        .classes
        .iter()
        .map(|(id, name)| CocoCategory {
            id,
            name: name.to_string(),
        })
        .collect();
    let doc = CocoGt {
        images,
        annotations,
        categories,
    };
    let bytes = serde_json::to_vec_pretty(&doc).expect("COCO GT serializes");
    write_bytes(path, &bytes)
}

/// Reads a COCO result list. Every record must carry a score.
pub fn read_coco_predictions(path: &Path) -> Result<PredictionSet> {
    let text = read_to_string(path)?;
    let results: Vec<CocoResult> = serde_json::from_str(&text).map_err(|e| CoteError::parse(path, e.to_string()))?;
    let mut warnings = Vec::new();
    let mut records = Vec::with_capacity(results.len());
    for (i, r) in results.iter().enumerate() {
        let score = r
            .score
            .ok_or_else(|| CoteError::parse(path, format!("record {i}: missing score")))?;
        if !(0.0..=1.0).contains(&score) {
            return Err(CoteError::parse(
                path,
                format!("record {i}: score {score} outside [0, 1]"),
            ));
        }
        let geometry = region_geometry(i, r.bbox, r.segmentation.as_ref(), path, &mut warnings)?;
        records.push(PredictionRecord {
            id: r.id.as_ref().map_or_else(|| i.to_string(), CocoId::as_string),
            image_id: r.image_id.as_string(),
            geometry,
            class_id: r.category_id,
            score: Some(score),
        });
    }
    let mut set = PredictionSet::from_records(records);
    set.warnings = warnings;
    Ok(set)
}

pub fn write_coco_predictions(set: &PredictionSet, path: &Path) -> Result<()> {
    let results: Vec<CocoResult> = set
        .records()
        .map(|r| CocoResult {
            image_id: CocoId::from_string(&r.image_id),
            category_id: r.class_id,
            bbox: geometry_to_bbox(&r.geometry),
            score: r.score,
            segmentation: polygon_segmentation(&r.geometry),
            id: Some(CocoId::from_string(&r.id)),
        })
        .collect();
    let bytes = serde_json::to_vec_pretty(&results).expect("COCO results serialize");
    write_bytes(path, &bytes)
}
