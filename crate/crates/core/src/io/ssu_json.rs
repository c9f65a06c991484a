//! SsuJson v1: an interchange format for SSU-labelled ground truth.
//!
//! ```json
//! {"format": "ssu-json", "version": 1,
//!  "classes": [{"id": 1, "name": "text"}],
//!  "pages": [{"image_id": "p1", "width": 800, "height": 600,
//!             "regions": [{"id": "r1", "class": "text",
//!                          "geometry": {"type": "box", "x0": 0, "y0": 0, "x1": 10, "y1": 10},
//!                          "structural_id": 1, "semantic_id": 1, "reading_order": 0}]}]}
//! ```
//!
//! Unknown fields at any level are kept in `extra` and written back out.

use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use super::{read_to_string, write_bytes, DatasetManifest, GtFormat, GtPage};
use crate::error::{CoteError, Result};
use crate::geometry::RegionGeometry;
use crate::mask::PageCanvas;
use crate::ssu::{ClassId, ClassMap, GroundTruthRegion};

pub const SSU_JSON_VERSION: u32 = 1;
const FORMAT_TAG: &str = "ssu-json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SsuClass {
    pub id: ClassId,
    pub name: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SsuRegion {
    pub id: String,
    pub class: String,
    pub geometry: RegionGeometry,
    #[serde(default)]
    pub structural_id: Option<i64>,
    #[serde(default)]
    pub semantic_id: Option<i64>,
    pub reading_order: u32,
    #[serde(flatten)]
    pub extra: Map<String, Value>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SsuPage {
    pub image_id: String,
    pub width: u32,
    pub height: u32,
    pub regions: Vec<SsuRegion>,
    #[serde(flatten)]
    pub extra: Map<String, Value>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SsuDocument {
    pub format: String,
    pub version: u32,
    #[serde(default)]
    pub classes: Vec<SsuClass>,
    pub pages: Vec<SsuPage>,
    #[serde(flatten)]
    pub extra: Map<String, Value>,
}

impl Default for SsuDocument {
    fn default() -> Self {
        SsuDocument {
            format: FORMAT_TAG.to_string(),
            version: SSU_JSON_VERSION,
            classes: Vec::new(),
            pages: Vec::new(),
            extra: Map::new(),
        }
    }
}

impl SsuDocument {
    pub fn from_pages(classes: &ClassMap, pages: &[GtPage]) -> Result<Self> {
        let mut out_pages = Vec::with_capacity(pages.len());
        for p in pages {
            let mut regions = Vec::with_capacity(p.regions.len());
            for r in &p.regions {
                let class = classes.name_of(r.class_id).ok_or(CoteError::MissingClass {
                    kind: "ground truth",
                    id: r.id.clone(),
                })?;
                regions.push(SsuRegion {
                    id: r.id.clone(),
                    class: class.to_string(),
                    geometry: r.geometry.clone(),
                    structural_id: r.structural_id,
                    semantic_id: r.semantic_id,
                    reading_order: r.reading_order,
                    extra: Map::new(),
                });
            }
            out_pages.push(SsuPage {
                image_id: p.image_id.clone(),
                width: p.canvas.width(),
                height: p.canvas.height(),
                regions,
                extra: Map::new(),
            });
        }
        Ok(SsuDocument {
            classes: classes
                .iter()
                .map(|(id, name)| SsuClass {
                    id,
                    name: name.to_string(),
                })
                .collect(),
            pages: out_pages,
            ..SsuDocument::default()
        })
    }

    pub fn from_manifest(manifest: &DatasetManifest) -> Result<Self> {
        Self::from_pages(&manifest.classes, &manifest.pages)
    }

    /// Converts to a manifest. Classes named by regions but missing from the
    /// class table are interned and reported as warnings.
    pub fn into_manifest(self) -> Result<DatasetManifest> {
        let mut classes = ClassMap::new();
        for c in &self.classes {
            classes.insert(c.id, c.name.clone());
        }
        let mut warnings = Vec::new();
        if !self.extra.is_empty() {
            warnings.push(format!("ignored top-level fields: {}", keys(&self.extra)));
        }
        let mut pages = Vec::with_capacity(self.pages.len());
        for p in self.pages {
            if !p.extra.is_empty() {
                warnings.push(format!("page {:?}: ignored fields: {}", p.image_id, keys(&p.extra)));
            }
            let mut regions = Vec::with_capacity(p.regions.len());
            for r in p.regions {
                let class_id = match classes.id_of(&r.class) {
                    Some(id) => id,
                    None => {
                        warnings.push(format!("class {:?} not in class table; assigned a new id", r.class));
                        classes.intern(&r.class)
                    }
                };
                if !r.extra.is_empty() {
                    warnings.push(format!("region {:?}: ignored fields: {}", r.id, keys(&r.extra)));
                }
                regions.push(GroundTruthRegion {
                    id: r.id,
                    geometry: r.geometry,
                    class_id,
                    structural_id: r.structural_id,
                    semantic_id: r.semantic_id,
                    reading_order: r.reading_order,
                });
            }
            pages.push(GtPage {
                canvas: PageCanvas::new(p.width, p.height)?,
                image_id: p.image_id,
                regions,
                source: None,
            });
        }
        Ok(DatasetManifest {
            format: GtFormat::SsuJson,
            classes,
            pages,
            warnings,
        })
    }
}

fn keys(m: &Map<String, Value>) -> String {
    m.keys().cloned().collect::<Vec<_>>().join(", ")
}

pub fn parse_ssu_json(text: &str, path: &Path) -> Result<SsuDocument> {
    let raw: Value = serde_json::from_str(text).map_err(|e| CoteError::parse(path, e.to_string()))?;
    match raw.get("version").and_then(Value::as_u64) {
        Some(v) if v == u64::from(SSU_JSON_VERSION) => {}
        Some(v) => {
            return Err(CoteError::VersionMismatch {
                expected: SSU_JSON_VERSION,
                found: v.to_string(),
            })
        }
        None => {
            return Err(CoteError::VersionMismatch {
                expected: SSU_JSON_VERSION,
                found: raw.get("version").map_or("nothing".to_string(), Value::to_string),
            })
        }
    }
    let doc: SsuDocument = serde_json::from_value(raw).map_err(|e| CoteError::parse(path, e.to_string()))?;
    if doc.format != FORMAT_TAG {
        return Err(CoteError::parse(
            path,
            format!("format tag {:?}, expected {FORMAT_TAG:?}", doc.format),
        ));
    }
    Ok(doc)
}

pub fn read_ssu_json(path: &Path) -> Result<SsuDocument> {
    parse_ssu_json(&read_to_string(path)?, path)
}

pub fn write_ssu_json(doc: &SsuDocument, path: &Path) -> Result<()> {
    let mut bytes = serde_json::to_vec_pretty(doc).expect("SsuJson serializes");
    bytes.push(b'\n');
    write_bytes(path, &bytes)
}
