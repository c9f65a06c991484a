//! Readers and writers for ground truth, predictions and reports.
//!
//! Coordinates everywhere are pixels with a top-left origin and y pointing
//! down. Readers never drop input silently: anything skipped or inferred is
//! recorded in a `warnings` list.

pub mod coco;
pub mod page_xml;
pub mod report;
pub mod ssu_json;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::cote::Prediction;
use crate::error::{CoteError, Result};
use crate::geometry::RegionGeometry;
use crate::mask::PageCanvas;
use crate::ssu::{ClassId, ClassMap, GroundTruthRegion};

/// Margin added around the region extent when a format carries no page size.
pub const INFERRED_CANVAS_MARGIN: f64 = 16.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GtFormat {
    PageXml,
    CocoGt,
    SsuJson,
}

impl std::str::FromStr for GtFormat {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "page-xml" | "page" => Ok(GtFormat::PageXml),
            "coco" | "coco-gt" => Ok(GtFormat::CocoGt),
            "ssu-json" | "ssu" => Ok(GtFormat::SsuJson),
            other => Err(format!(
                "unknown ground-truth format {other:?} (expected page-xml, coco or ssu-json)"
            )),
        }
    }
}

/// Ground truth of one page.
#[derive(Debug, Clone, PartialEq)]
pub struct GtPage {
    pub image_id: String,
    pub canvas: PageCanvas,
    pub regions: Vec<GroundTruthRegion>,
    pub source: Option<PathBuf>,
}

/// A ground-truth dataset: pages, their source format and the class map.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetManifest {
    pub format: GtFormat,
    pub classes: ClassMap,
    pub pages: Vec<GtPage>,
    pub warnings: Vec<String>,
}

impl DatasetManifest {
    pub fn page(&self, image_id: &str) -> Option<&GtPage> {
        self.pages.iter().find(|p| p.image_id == image_id)
    }

    fn check_unique_ids(&self, path: &Path) -> Result<()> {
        let mut seen = std::collections::BTreeSet::new();
        for p in &self.pages {
            if !seen.insert(p.image_id.as_str()) {
                return Err(CoteError::parse(path, format!("duplicate image id {:?}", p.image_id)));
            }
        }
        Ok(())
    }
}

/// Loads ground truth. `PageXml` accepts a single file or a directory of
/// `.xml` files.
pub fn load_ground_truth(path: &Path, format: GtFormat) -> Result<DatasetManifest> {
    let manifest = match format {
        GtFormat::PageXml => page_xml::read_page_xml_dataset(path)?,
        GtFormat::CocoGt => coco::read_coco_gt(path)?,
        GtFormat::SsuJson => ssu_json::read_ssu_json(path)?.into_manifest()?,
    };
    manifest.check_unique_ids(path)?;
    Ok(manifest)
}

/// One predicted region before rasterization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub id: String,
    pub image_id: String,
    pub geometry: RegionGeometry,
    pub class_id: ClassId,
    pub score: Option<f64>,
}

impl PredictionRecord {
    pub fn to_prediction(&self, canvas: PageCanvas) -> Result<Prediction> {
        Prediction::new(
            self.id.clone(),
            self.geometry.clone(),
            self.class_id,
            self.score,
            canvas,
        )
    }
}

/// Predictions grouped by image id.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PredictionSet {
    pub by_image: BTreeMap<String, Vec<PredictionRecord>>,
    pub warnings: Vec<String>,
}

impl PredictionSet {
    pub fn from_records(records: impl IntoIterator<Item = PredictionRecord>) -> Self {
        let mut by_image: BTreeMap<String, Vec<PredictionRecord>> = BTreeMap::new();
        for r in records {
            by_image.entry(r.image_id.clone()).or_default().push(r);
        }
        PredictionSet {
            by_image,
            warnings: Vec::new(),
        }
    }

    pub fn for_image(&self, image_id: &str) -> &[PredictionRecord] {
        self.by_image.get(image_id).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn len(&self) -> usize {
        self.by_image.values().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn records(&self) -> impl Iterator<Item = &PredictionRecord> {
        self.by_image.values().flatten()
    }
}

/// Canvas covering every region plus a fixed margin.
pub(crate) fn infer_canvas<'a>(geoms: impl IntoIterator<Item = &'a RegionGeometry>) -> Result<PageCanvas> {
    let (mut w, mut h) = (1.0f64, 1.0f64);
    for g in geoms {
        if let Some((_, _, x1, y1)) = g.bounds() {
            w = w.max(x1);
            h = h.max(y1);
        }
    }
    PageCanvas::new(
        (w + INFERRED_CANVAS_MARGIN).ceil() as u32,
        (h + INFERRED_CANVAS_MARGIN).ceil() as u32,
    )
}

pub(crate) fn read_to_string(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| CoteError::io(path, e))
}

pub(crate) fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| CoteError::io(dir, e))?;
    }
    std::fs::write(path, bytes).map_err(|e| CoteError::io(path, e))
}
