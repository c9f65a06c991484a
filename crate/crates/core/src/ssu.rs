//! Labelled pages and Structural Semantic Unit grouping.
//!
//! Two regions belong to the same SSU when they are consecutive in reading
//! order and agree on class, structural unit and semantic unit. A region with
//! no structural or semantic id never shares a unit along that axis, so pages
//! without SSU labels degrade to one SSU per region.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{CoteError, Result};
use crate::geometry::RegionGeometry;
use crate::mask::{self, PageCanvas, PixelMask};

pub type ClassId = u32;

/// Bidirectional mapping between class ids (starting at 1) and names.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassMap {
    names: BTreeMap<ClassId, String>,
}

impl ClassMap {
    pub fn new() -> Self {
        Self::default()
    }

    /// Single reserved class 1 for class-agnostic evaluation.
    pub fn agnostic() -> Self {
        let mut m = Self::new();
        m.insert(1, "region");
        m
    }

    pub fn insert(&mut self, id: ClassId, name: impl Into<String>) {
        self.names.insert(id, name.into());
    }

    /// Returns the id of `name`, allocating the next free id if absent.
    pub fn intern(&mut self, name: &str) -> ClassId {
        if let Some(id) = self.id_of(name) {
            return id;
        }
        let id = self.names.keys().next_back().map_or(1, |k| k + 1);
        self.names.insert(id, name.to_string());
        id
    }

    pub fn id_of(&self, name: &str) -> Option<ClassId> {
        self.names.iter().find(|(_, n)| n.as_str() == name).map(|(id, _)| *id)
    }

    pub fn name_of(&self, id: ClassId) -> Option<&str> {
        self.names.get(&id).map(String::as_str)
    }

    pub fn iter(&self) -> impl Iterator<Item = (ClassId, &str)> {
        self.names.iter().map(|(id, n)| (*id, n.as_str()))
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }
}

/// One labelled ground-truth region.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruthRegion {
    pub id: String,
    pub geometry: RegionGeometry,
    pub class_id: ClassId,
    pub structural_id: Option<i64>,
    pub semantic_id: Option<i64>,
    pub reading_order: u32,
}

impl GroundTruthRegion {
    pub fn new(id: impl Into<String>, geometry: RegionGeometry, class_id: ClassId, reading_order: u32) -> Self {
        GroundTruthRegion {
            id: id.into(),
            geometry,
            class_id,
            structural_id: None,
            semantic_id: None,
            reading_order,
        }
    }

    pub fn with_units(mut self, structural_id: i64, semantic_id: i64) -> Self {
        self.structural_id = Some(structural_id);
        self.semantic_id = Some(semantic_id);
        self
    }

    /// Copy with structural and semantic labels removed.
    pub fn without_units(&self) -> Self {
        GroundTruthRegion {
            structural_id: None,
            semantic_id: None,
            ..self.clone()
        }
    }

    fn same_unit(&self, other: &GroundTruthRegion) -> bool {
        fn eq(a: Option<i64>, b: Option<i64>) -> bool {
            matches!((a, b), (Some(a), Some(b)) if a == b)
        }
        self.class_id == other.class_id
            && eq(self.structural_id, other.structural_id)
            && eq(self.semantic_id, other.semantic_id)
    }
}

/// A Structural Semantic Unit.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Ssu {
    /// Position in reading order of the first member.
    pub index: usize,
    pub class_id: ClassId,
    pub member_region_ids: Vec<String>,
    pub mask: PixelMask,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OverlapPolicy {
    /// Any overlap between SSU masks is an error.
    Strict,
    /// Contested pixels belong to the lowest-index SSU.
    #[default]
    ClipToEarlier,
}

/// SSUs after overlap resolution.
#[derive(Debug, Clone)]
pub struct ResolvedSsus {
    pub ssus: Vec<Ssu>,
    pub clipped_pixels: u64,
}

/// Makes SSU masks pairwise disjoint according to `policy`.
pub fn resolve_ssu_overlaps(ssus: Vec<Ssu>, policy: OverlapPolicy) -> Result<ResolvedSsus> {
    let Some(canvas) = ssus.first().map(|s| s.mask.canvas()) else {
        return Ok(ResolvedSsus {
            ssus,
            clipped_pixels: 0,
        });
    };
    match policy {
        OverlapPolicy::Strict => {
            for (i, a) in ssus.iter().enumerate() {
                for b in &ssus[i + 1..] {
                    let area = a.mask.intersect_area(&b.mask)?;
                    if area > 0 {
                        return Err(CoteError::SsuOverlap {
                            earlier: a.index,
                            later: b.index,
                            area,
                            region_ids: a
                                .member_region_ids
                                .iter()
                                .chain(&b.member_region_ids)
                                .cloned()
                                .collect(),
                        });
                    }
                }
            }
            Ok(ResolvedSsus {
                ssus,
                clipped_pixels: 0,
            })
        }
        OverlapPolicy::ClipToEarlier => {
            let mut claimed = PixelMask::empty(canvas);
            let mut clipped_pixels = 0;
            let mut out = Vec::with_capacity(ssus.len());
            for mut ssu in ssus {
                let kept = ssu.mask.subtract(&claimed)?;
                clipped_pixels += ssu.mask.area() - kept.area();
                claimed = claimed.union(&kept)?;
                ssu.mask = kept;
                out.push(ssu);
            }
            Ok(ResolvedSsus {
                ssus: out,
                clipped_pixels,
            })
        }
    }
}

/// Ground truth of one page organised into disjoint SSUs.
#[derive(Debug, Clone)]
pub struct LabelledPage {
    canvas: PageCanvas,
    ssus: Vec<Ssu>,
    composite: PixelMask,
    class_areas: BTreeMap<ClassId, u64>,
    clipped_pixels: u64,
}

impl LabelledPage {
    /// Builds a page from SSUs that are already pairwise disjoint.
    pub fn from_disjoint_ssus(canvas: PageCanvas, ssus: Vec<Ssu>) -> Result<Self> {
        let composite = mask::union(canvas, ssus.iter().map(|s| &s.mask))?;
        let mut class_areas = BTreeMap::new();
        for s in &ssus {
            *class_areas.entry(s.class_id).or_insert(0) += s.mask.area();
        }
        debug_assert_eq!(class_areas.values().sum::<u64>(), composite.area());
        Ok(LabelledPage {
            canvas,
            ssus,
            composite,
            class_areas,
            clipped_pixels: 0,
        })
    }

    pub fn canvas(&self) -> PageCanvas {
        self.canvas
    }

    pub fn ssus(&self) -> &[Ssu] {
        &self.ssus
    }

    /// Union of every SSU mask.
    pub fn composite_mask(&self) -> &PixelMask {
        &self.composite
    }

    /// Total SSU area.
    pub fn gt_area(&self) -> u64 {
        self.composite.area()
    }

    /// Area of the page not covered by any SSU.
    pub fn negative_area(&self) -> u64 {
        self.canvas.area() - self.gt_area()
    }

    pub fn class_areas(&self) -> &BTreeMap<ClassId, u64> {
        &self.class_areas
    }

    /// Pixels removed from later SSUs during overlap resolution.
    pub fn clipped_pixels(&self) -> u64 {
        self.clipped_pixels
    }
}

/// Groups regions into SSUs in reading order.
pub fn group_regions_into_ssus(
    regions: &[GroundTruthRegion],
    canvas: PageCanvas,
    policy: OverlapPolicy,
) -> Result<LabelledPage> {
    let ordered = sorted_by_reading_order(regions)?;
    let mut groups: Vec<Vec<&GroundTruthRegion>> = Vec::new();
    for region in ordered {
        match groups.last_mut() {
            Some(group) if group.last().is_some_and(|prev| prev.same_unit(region)) => group.push(region),
            _ => groups.push(vec![region]),
        }
    }
    let ssus = groups
        .into_iter()
        .enumerate()
        .map(|(index, members)| {
            let masks: Vec<PixelMask> = members.iter().map(|r| r.geometry.rasterize(canvas)).collect();
            Ok(Ssu {
                index,
                class_id: members[0].class_id,
                member_region_ids: members.iter().map(|r| r.id.clone()).collect(),
                mask: mask::union(canvas, &masks)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let resolved = resolve_ssu_overlaps(ssus, policy)?;
    let mut page = LabelledPage::from_disjoint_ssus(canvas, resolved.ssus)?;
    page.clipped_pixels = resolved.clipped_pixels;
    Ok(page)
}

pub(crate) fn sorted_by_reading_order(regions: &[GroundTruthRegion]) -> Result<Vec<&GroundTruthRegion>> {
    let mut ordered: Vec<&GroundTruthRegion> = regions.iter().collect();
    ordered.sort_by_key(|r| r.reading_order);
    for pair in ordered.windows(2) {
        if pair[0].reading_order == pair[1].reading_order {
            return Err(CoteError::DuplicateReadingOrder {
                index: pair[0].reading_order,
                first: pair[0].id.clone(),
                second: pair[1].id.clone(),
            });
        }
    }
    Ok(ordered)
}

/// Parameters of the header/column auto-labeller.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AutoLabelConfig {
    /// Class name that opens a new semantic unit.
    pub header_class: String,
    /// Minimum horizontal overlap, as a fraction of the narrower region, for
    /// two consecutive regions to share a column.
    pub column_overlap_threshold: f64,
}

impl AutoLabelConfig {
    pub fn new(header_class: impl Into<String>) -> Self {
        AutoLabelConfig {
            header_class: header_class.into(),
            column_overlap_threshold: 0.5,
        }
    }
}

/// Fills semantic ids from header positions and structural ids from a
/// column heuristic. Regions are returned in reading order. Explicit
/// structural ids are kept as given.
pub fn autolabel_ssu_from_structure(
    regions: &[GroundTruthRegion],
    classes: &ClassMap,
    config: &AutoLabelConfig,
) -> Result<Vec<GroundTruthRegion>> {
    let header = classes
        .id_of(&config.header_class)
        .ok_or_else(|| CoteError::UnknownHeaderClass(config.header_class.clone()))?;
    let ordered = sorted_by_reading_order(regions)?;

    let mut next_structural = ordered
        .iter()
        .filter_map(|r| r.structural_id)
        .max()
        .map_or(1, |m| m + 1);
    let mut semantic = 1i64;
    let mut out: Vec<GroundTruthRegion> = Vec::with_capacity(ordered.len());
    for (pos, region) in ordered.into_iter().enumerate() {
        let mut labelled = region.clone();
        if region.class_id == header && pos > 0 {
            semantic += 1;
        }
        labelled.semantic_id = Some(semantic);
        if labelled.structural_id.is_none() {
            let shared = out.last().and_then(|prev| {
                let overlap = horizontal_overlap_fraction(&prev.geometry, &region.geometry);
                (overlap >= config.column_overlap_threshold)
                    .then_some(prev.structural_id)
                    .flatten()
            });
            labelled.structural_id = Some(shared.unwrap_or_else(|| {
                next_structural += 1;
                next_structural - 1
            }));
        }
        out.push(labelled);
    }
    Ok(out)
}

/// Overlap of the x-extents of `a` and `b` relative to the narrower extent.
fn horizontal_overlap_fraction(a: &RegionGeometry, b: &RegionGeometry) -> f64 {
    let (Some((ax0, _, ax1, _)), Some((bx0, _, bx1, _))) = (a.bounds(), b.bounds()) else {
        return 0.0;
    };
    let narrower = (ax1 - ax0).min(bx1 - bx0);
    if narrower <= 0.0 {
        return 0.0;
    }
    let overlap = ax1.min(bx1) - ax0.max(bx0);
    (overlap / narrower).max(0.0)
}
