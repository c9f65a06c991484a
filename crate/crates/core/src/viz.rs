//! Per-pixel COTe states and their PNG rendering.
//!
//! A ground-truth pixel is classified by how many predictions cover it and
//! whether any of them is assigned to a different SSU. Foreign coverage wins
//! over stacking: a pixel with both is `TrespassOverlap`.

use std::io::BufWriter;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::cote::{self, AssignmentMap, Prediction};
use crate::error::{CoteError, Result};
use crate::ssu::LabelledPage;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum CoteState {
    Background,
    GtUncovered,
    Single,
    Overlap,
    Trespass,
    TrespassOverlap,
    Excess,
}

impl CoteState {
    pub const ALL: [CoteState; 7] = [
        CoteState::Background,
        CoteState::GtUncovered,
        CoteState::Single,
        CoteState::Overlap,
        CoteState::Trespass,
        CoteState::TrespassOverlap,
        CoteState::Excess,
    ];

    pub fn color(self) -> [u8; 3] {
        match self {
            CoteState::Background => [0xff, 0xff, 0xff],
            CoteState::GtUncovered => [0xbd, 0xc3, 0xc7],
            CoteState::Single => [0x2e, 0xcc, 0x71],
            CoteState::Overlap => [0xf1, 0xc4, 0x0f],
            CoteState::Trespass => [0xe7, 0x4c, 0x3c],
            CoteState::TrespassOverlap => [0x9b, 0x59, 0xb6],
            CoteState::Excess => [0x34, 0x98, 0xdb],
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            CoteState::Background => "background",
            CoteState::GtUncovered => "gt-uncovered",
            CoteState::Single => "single",
            CoteState::Overlap => "overlap",
            CoteState::Trespass => "trespass",
            CoteState::TrespassOverlap => "trespass-overlap",
            CoteState::Excess => "excess",
        }
    }

    /// States of ground-truth pixels that some prediction covers.
    pub fn is_covered_gt(self) -> bool {
        matches!(
            self,
            CoteState::Single | CoteState::Overlap | CoteState::Trespass | CoteState::TrespassOverlap
        )
    }
}

/// Legend stored in the PNG `tEXt` chunk, e.g. `single=#2ecc71;...`.
pub fn legend() -> String {
    CoteState::ALL
        .iter()
        .map(|s| {
            let [r, g, b] = s.color();
            format!("{}=#{r:02x}{g:02x}{b:02x}", s.name())
        })
        .collect::<Vec<_>>()
        .join(";")
}

/// Dense row-major state of every pixel, plus the prediction count behind it.
#[derive(Debug, Clone, PartialEq)]
pub struct CoteStateImage {
    width: u32,
    height: u32,
    states: Vec<CoteState>,
    coverage_count: Vec<u32>,
}

impl CoteStateImage {
    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn get(&self, x: u32, y: u32) -> CoteState {
        self.states[(y as usize) * self.width as usize + x as usize]
    }

    pub fn states(&self) -> &[CoteState] {
        &self.states
    }

    /// Pixel count per state, in [`CoteState::ALL`] order.
    pub fn state_counts(&self) -> [u64; 7] {
        let mut counts = [0u64; 7];
        for s in &self.states {
            counts[*s as usize] += 1;
        }
        counts
    }

    pub fn count(&self, state: CoteState) -> u64 {
        self.state_counts()[state as usize]
    }

    /// Sum of `coverage - 1` over stacked ground-truth pixels.
    pub fn multiplicity_excess(&self) -> u64 {
        self.states
            .iter()
            .zip(&self.coverage_count)
            .filter(|(s, _)| matches!(s, CoteState::Overlap | CoteState::TrespassOverlap))
            .map(|(_, &c)| u64::from(c) - 1)
            .sum()
    }
}

const NO_SSU: u32 = u32::MAX;

pub fn classify_pixels(
    page: &LabelledPage,
    preds: &[Prediction],
    assignment: &AssignmentMap,
) -> Result<CoteStateImage> {
    let canvas = page.canvas();
    for p in preds {
        canvas.ensure_same(&p.mask().canvas())?;
    }
    let (w, h) = (canvas.width() as usize, canvas.height() as usize);
    let mut ssu_of = vec![NO_SSU; w * h];
    for (i, s) in page.ssus().iter().enumerate() {
        for (y, spans) in s.mask.iter_rows() {
            let row = y as usize * w;
            for sp in spans {
                ssu_of[row + sp.start as usize..row + sp.end as usize].fill(i as u32);
            }
        }
    }
    let mut own = vec![0u32; w * h];
    let mut foreign = vec![0u32; w * h];
    let mut predicted = vec![false; w * h];
    for (j, p) in preds.iter().enumerate() {
        let target = assignment.ssu_of(j).map_or(NO_SSU, |a| a as u32);
        for (y, spans) in p.mask().iter_rows() {
            let row = y as usize * w;
            for sp in spans {
                for k in row + sp.start as usize..row + sp.end as usize {
                    predicted[k] = true;
                    match ssu_of[k] {
                        NO_SSU => {}
                        s if s == target => own[k] += 1,
                        _ => foreign[k] += 1,
                    }
                }
            }
        }
    }
    let mut states = Vec::with_capacity(w * h);
    let mut coverage_count = Vec::with_capacity(w * h);
    for k in 0..w * h {
        let c = own[k] + foreign[k];
        let state = if ssu_of[k] == NO_SSU {
            if predicted[k] {
                CoteState::Excess
            } else {
                CoteState::Background
            }
        } else {
            match (c, foreign[k] > 0) {
                (0, _) => CoteState::GtUncovered,
                (1, false) => CoteState::Single,
                (_, false) => CoteState::Overlap,
                (1, true) => CoteState::Trespass,
                (_, true) => CoteState::TrespassOverlap,
            }
        };
        states.push(state);
        coverage_count.push(c);
    }
    Ok(CoteStateImage {
        width: canvas.width(),
        height: canvas.height(),
        states,
        coverage_count,
    })
}

/// Weight of the state colour when blending over a page image.
pub const OVERLAY_ALPHA: f64 = 0.5;

/// RGB pixels of the overlay. Without a base image the states are drawn
/// opaque on white; with one, non-background states are blended over it
/// and background pixels show the page unchanged.
pub fn overlay_pixels(states: &CoteStateImage, base: Option<&image::RgbImage>) -> Result<Vec<u8>> {
    if let Some(b) = base {
        if b.dimensions() != (states.width, states.height) {
            return Err(CoteError::Image(format!(
                "base image is {}x{}, page canvas is {}x{}",
                b.width(),
                b.height(),
                states.width,
                states.height
            )));
        }
    }
    let mut out = Vec::with_capacity(states.states.len() * 3);
    for (k, s) in states.states.iter().enumerate() {
        let color = s.color();
        match base {
            None => out.extend_from_slice(&color),
            Some(b) => {
                let x = (k % states.width as usize) as u32;
                let y = (k / states.width as usize) as u32;
                let under = b.get_pixel(x, y).0;
                if *s == CoteState::Background {
                    out.extend_from_slice(&under);
                } else {
                    for c in 0..3 {
                        let v = OVERLAY_ALPHA * f64::from(color[c]) + (1.0 - OVERLAY_ALPHA) * f64::from(under[c]);
                        out.push(v.round() as u8);
                    }
                }
            }
        }
    }
    Ok(out)
}

/// Writes the overlay as an 8-bit RGB PNG with the legend in a `tEXt` chunk.
pub fn render_overlay(states: &CoteStateImage, base: Option<&Path>, path: &Path) -> Result<()> {
    let base_image = match base {
        Some(p) => Some(
            image::open(p)
                .map_err(|e| CoteError::Image(format!("{}: {e}", p.display())))?
                .to_rgb8(),
        ),
        None => None,
    };
    let pixels = overlay_pixels(states, base_image.as_ref())?;
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| CoteError::io(dir, e))?;
    }
    let file = std::fs::File::create(path).map_err(|e| CoteError::io(path, e))?;
    let mut encoder = png::Encoder::new(BufWriter::new(file), states.width, states.height);
    encoder.set_color(png::ColorType::Rgb);
    encoder.set_depth(png::BitDepth::Eight);
    let png_err = |e: png::EncodingError| CoteError::Image(format!("{}: {e}", path.display()));
    encoder
        .add_text_chunk("Legend".to_string(), legend())
        .map_err(png_err)?;
    let mut writer = encoder.write_header().map_err(png_err)?;
    writer.write_image_data(&pixels).map_err(png_err)?;
    writer.finish().map_err(png_err)
}

/// Assigns predictions, classifies every pixel and writes the overlay.
pub fn visualize_cote_states(
    page: &LabelledPage,
    preds: &[Prediction],
    base: Option<&Path>,
    path: &Path,
) -> Result<CoteStateImage> {
    let assignment = cote::assign_predictions(page, preds)?;
    let states = classify_pixels(page, preds, &assignment)?;
    render_overlay(&states, base, path)?;
    Ok(states)
}
