//! Synthetic column layouts labelled at line and paragraph granularity.
//!
//! Every block is a stack of text lines. At paragraph granularity a block is
//! one region: the tight bounding box of its lines, so the gaps between
//! lines and the space after short lines are voids inside the paragraph.
//! Both granularities share class, structural and semantic ids, so they
//! group into the same SSUs.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{CoteError, Result};
use crate::geometry::RegionGeometry;
use crate::io::{GtPage, PredictionRecord};
use crate::mask::PageCanvas;
use crate::ssu::{self, ClassId, ClassMap, GroundTruthRegion, LabelledPage, OverlapPolicy};

pub const TEXT_CLASS: ClassId = 1;
pub const TITLE_CLASS: ClassId = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockSpec {
    pub lines: u32,
    pub line_height: u32,
    /// Vertical space between consecutive lines of the block.
    pub line_gap: u32,
    /// Titles open a new semantic unit.
    pub title: bool,
}

impl BlockSpec {
    pub fn text(lines: u32) -> Self {
        BlockSpec {
            lines,
            line_height: 20,
            line_gap: 6,
            title: false,
        }
    }

    pub fn title() -> Self {
        BlockSpec {
            title: true,
            ..BlockSpec::text(1)
        }
    }

    fn height(&self) -> u32 {
        self.lines * self.line_height + self.lines.saturating_sub(1) * self.line_gap
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticLayoutSpec {
    pub width: u32,
    pub height: u32,
    pub margin: u32,
    pub gutter: u32,
    /// Vertical space between blocks in a column.
    pub block_gap: u32,
    /// Blocks of each column, top to bottom. Reading order is column-major.
    pub columns: Vec<Vec<BlockSpec>>,
    /// Each line spans a uniform random fraction in `[ragged_min, 1]` of the
    /// column width.
    pub ragged_min: f64,
    pub seed: u64,
}

impl SyntheticLayoutSpec {
    /// Three limericks in two columns; the second is split by the column
    /// break and the third has a wrapped line. 19 lines, 7 paragraphs.
    pub fn limericks() -> Self {
        SyntheticLayoutSpec {
            width: 800,
            height: 600,
            margin: 40,
            gutter: 30,
            block_gap: 20,
            columns: vec![
                vec![
                    BlockSpec::title(),
                    BlockSpec::text(5),
                    BlockSpec::title(),
                    BlockSpec::text(1),
                ],
                vec![BlockSpec::text(4), BlockSpec::title(), BlockSpec::text(6)],
            ],
            ragged_min: 0.9,
            seed: 7,
        }
    }

    fn column_width(&self) -> Result<u32> {
        let n = self.columns.len() as u32;
        let used = 2 * self.margin + n.saturating_sub(1) * self.gutter;
        if n == 0 || self.width <= used || (self.width - used) / n == 0 {
            return Err(CoteError::InvalidLayout(format!(
                "{n} columns do not fit a {}px wide page with margin {} and gutter {}",
                self.width, self.margin, self.gutter
            )));
        }
        Ok((self.width - used) / n)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Granularity {
    Line,
    Paragraph,
}

/// One layout at both granularities. `paragraph_of[i]` is the index of the
/// paragraph containing line `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticLayout {
    pub canvas: PageCanvas,
    pub classes: ClassMap,
    pub lines: Vec<GroundTruthRegion>,
    pub paragraphs: Vec<GroundTruthRegion>,
    pub paragraph_of: Vec<usize>,
}

impl SyntheticLayout {
    pub fn regions(&self, g: Granularity) -> &[GroundTruthRegion] {
        match g {
            Granularity::Line => &self.lines,
            Granularity::Paragraph => &self.paragraphs,
        }
    }

    pub fn labelled_page(&self, g: Granularity) -> Result<LabelledPage> {
        ssu::group_regions_into_ssus(self.regions(g), self.canvas, OverlapPolicy::Strict)
    }

    pub fn line_page(&self) -> Result<LabelledPage> {
        self.labelled_page(Granularity::Line)
    }

    pub fn paragraph_page(&self) -> Result<LabelledPage> {
        self.labelled_page(Granularity::Paragraph)
    }

    pub fn gt_page(&self, g: Granularity, image_id: &str) -> GtPage {
        GtPage {
            image_id: image_id.to_string(),
            canvas: self.canvas,
            regions: self.regions(g).to_vec(),
            source: None,
        }
    }

    /// Predictions identical to the regions of granularity `g`, score 1.
    pub fn perfect_predictions(&self, g: Granularity, image_id: &str) -> Vec<PredictionRecord> {
        self.regions(g)
            .iter()
            .map(|r| PredictionRecord {
                id: r.id.clone(),
                image_id: image_id.to_string(),
                geometry: r.geometry.clone(),
                class_id: r.class_id,
                score: Some(1.0),
            })
            .collect()
    }
}

pub fn synthetic_classes() -> ClassMap {
    let mut classes = ClassMap::new();
    classes.insert(TEXT_CLASS, "text");
    classes.insert(TITLE_CLASS, "title");
    classes
}

/// Generates the layout described by `spec`. Deterministic per seed.
pub fn generate_layout(spec: &SyntheticLayoutSpec) -> Result<SyntheticLayout> {
    let canvas = PageCanvas::new(spec.width, spec.height)?;
    let col_w = spec.column_width()?;
    if !(0.0..=1.0).contains(&spec.ragged_min) {
        return Err(CoteError::InvalidLayout(format!(
            "ragged_min {} outside [0, 1]",
            spec.ragged_min
        )));
    }
    let bottom = spec.height.saturating_sub(spec.margin);
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);

    let mut lines = Vec::new();
    let mut paragraphs = Vec::new();
    let mut paragraph_of = Vec::new();
    let mut semantic = 1i64;
    let mut order = 0u32;
    for (ci, blocks) in spec.columns.iter().enumerate() {
        let x0 = spec.margin + ci as u32 * (col_w + spec.gutter);
        let mut y = spec.margin;
        for (bi, block) in blocks.iter().enumerate() {
            if block.lines == 0 || block.line_height == 0 {
                return Err(CoteError::InvalidLayout(format!("column {ci} block {bi} has no lines")));
            }
            if bi > 0 {
                y += spec.block_gap;
            }
            if y + block.height() > bottom {
                return Err(CoteError::InvalidLayout(format!(
                    "column {ci} block {bi} ends at y={} below the bottom margin at y={bottom}",
                    y + block.height()
                )));
            }
            if block.title && !lines.is_empty() {
                semantic += 1;
            }
            let class = if block.title { TITLE_CLASS } else { TEXT_CLASS };
            let structural = ci as i64 + 1;
            let para_index = paragraphs.len();
            let top = y;
            let mut widest = 0u32;
            for li in 0..block.lines {
                let frac = if spec.ragged_min < 1.0 {
                    rng.random_range(spec.ragged_min..=1.0)
                } else {
                    1.0
                };
                let w = ((col_w as f64 * frac).round() as u32).clamp(1, col_w);
                widest = widest.max(w);
                let geometry =
                    RegionGeometry::bbox(x0 as f64, y as f64, (x0 + w) as f64, (y + block.line_height) as f64);
                lines.push(
                    GroundTruthRegion::new(format!("l{}", lines.len()), geometry, class, order)
                        .with_units(structural, semantic),
                );
                paragraph_of.push(para_index);
                order += 1;
                y += block.line_height;
                if li + 1 < block.lines {
                    y += block.line_gap;
                }
            }
            let geometry = RegionGeometry::bbox(x0 as f64, top as f64, (x0 + widest) as f64, y as f64);
            paragraphs.push(
                GroundTruthRegion::new(format!("p{para_index}"), geometry, class, para_index as u32)
                    .with_units(structural, semantic),
            );
        }
    }
    Ok(SyntheticLayout {
        canvas,
        classes: synthetic_classes(),
        lines,
        paragraphs,
        paragraph_of,
    })
}
