//! Random scenes and a dense per-pixel oracle for the COTe quantities.
//!
//! The oracle works on plain `Vec<bool>` bitmaps and tests every pixel
//! independently, so it shares no code with the interval engine.

#![allow(dead_code)]

use std::collections::BTreeMap;

use cote_core::ssu::ClassId;
use cote_core::{GroundTruthRegion, PageCanvas, Prediction, RegionGeometry};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub struct Scene {
    pub canvas: PageCanvas,
    pub regions: Vec<GroundTruthRegion>,
    pub preds: Vec<Prediction>,
}

#[derive(Debug, Clone, Copy)]
pub struct SceneLimits {
    pub max_side: u32,
    pub max_ssus: usize,
    pub max_regions_per_ssu: usize,
    pub max_preds: usize,
    pub classes: u32,
}

impl Default for SceneLimits {
    fn default() -> Self {
        SceneLimits {
            max_side: 512,
            max_ssus: 10,
            max_regions_per_ssu: 3,
            max_preds: 15,
            classes: 3,
        }
    }
}

fn coord(rng: &mut ChaCha8Rng, max: u32) -> f64 {
    // quarter-pixel grid, slightly past the canvas edge to exercise clipping
    let q = rng.random_range(-8..=(max as i64 + 8) * 4);
    q as f64 / 4.0
}

pub fn random_geometry(rng: &mut ChaCha8Rng, w: u32, h: u32) -> RegionGeometry {
    if rng.random_bool(0.6) {
        let (xa, xb) = (coord(rng, w), coord(rng, w));
        let (ya, yb) = (coord(rng, h), coord(rng, h));
        RegionGeometry::bbox(xa.min(xb), ya.min(yb), xa.max(xb), ya.max(yb))
    } else {
        let n = rng.random_range(3..=7);
        let cx = rng.random_range(0.0..w as f64);
        let cy = rng.random_range(0.0..h as f64);
        let r = rng.random_range(2.0..(w.max(h) as f64 / 2.0).max(3.0));
        RegionGeometry::polygon((0..n).map(|_| [cx + rng.random_range(-r..r), cy + rng.random_range(-r..r)]))
    }
}

/// A random scene with at least one non-empty SSU region.
pub fn random_scene(seed: u64, limits: SceneLimits) -> Scene {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let w = rng.random_range(8..=limits.max_side);
    let h = rng.random_range(8..=limits.max_side);
    let canvas = PageCanvas::new(w, h).unwrap();
    let n_ssus = rng.random_range(1..=limits.max_ssus);
    let mut regions = Vec::new();
    for s in 0..n_ssus {
        let class = rng.random_range(1..=limits.classes);
        let structural = rng.random_range(1..=2);
        for _ in 0..rng.random_range(1..=limits.max_regions_per_ssu) {
            let geometry = if regions.is_empty() {
                let x = rng.random_range(0..w - 4) as f64;
                let y = rng.random_range(0..h - 4) as f64;
                RegionGeometry::bbox(x, y, x + 4.0, y + 4.0)
            } else {
                random_geometry(&mut rng, w, h)
            };
            let order = regions.len() as u32;
            regions.push(
                GroundTruthRegion::new(format!("g{order}"), geometry, class, order)
                    .with_units(structural, s as i64 + 1),
            );
        }
    }
    let n_preds = rng.random_range(0..=limits.max_preds);
    let preds = (0..n_preds)
        .map(|j| {
            let g = random_geometry(&mut rng, w, h);
            let class = rng.random_range(1..=limits.classes);
            let score = rng.random_range(0.0..=1.0);
            Prediction::new(format!("p{j}"), g, class, Some(score), canvas).unwrap()
        })
        .collect();
    Scene { canvas, regions, preds }
}

/// Pixel (x, y) of a box: inside the rounded, half-open edge interval.
fn box_contains(x0: f64, y0: f64, x1: f64, y1: f64, x: u32, y: u32) -> bool {
    let (px, py) = (x as f64, y as f64);
    px >= x0.round() && px < x1.round() && py >= y0.round() && py < y1.round()
}

/// Even-odd test of the pixel centre: count edge crossings to its right.
fn polygon_contains(points: &[[f64; 2]], x: u32, y: u32) -> bool {
    let (cx, cy) = (x as f64 + 0.5, y as f64 + 0.5);
    let mut inside = false;
    let n = points.len();
    for i in 0..n {
        let [xi, yi] = points[i];
        let [xj, yj] = points[(i + 1) % n];
        if (yi > cy) != (yj > cy) {
            let xc = xi + (cy - yi) * (xj - xi) / (yj - yi);
            if cx < xc {
                inside = !inside;
            }
        }
    }
    inside
}

pub fn dense(g: &RegionGeometry, canvas: PageCanvas) -> Vec<bool> {
    let (w, h) = (canvas.width(), canvas.height());
    let mut bits = vec![false; (w * h) as usize];
    match g {
        RegionGeometry::Box { x0, y0, x1, y1 } => {
            for y in 0..h {
                for x in 0..w {
                    bits[(y * w + x) as usize] = box_contains(*x0, *y0, *x1, *y1, x, y);
                }
            }
        }
        RegionGeometry::Polygon { points } => {
            if points.len() < 3 || points.iter().flatten().any(|v| !v.is_finite()) {
                return bits;
            }
            // only rows and columns the polygon can reach
            let ymin = points
                .iter()
                .map(|p| p[1])
                .fold(f64::INFINITY, f64::min)
                .floor()
                .max(0.0) as u32;
            let ymax = points
                .iter()
                .map(|p| p[1])
                .fold(f64::NEG_INFINITY, f64::max)
                .ceil()
                .min(h as f64) as u32;
            let xmin = points
                .iter()
                .map(|p| p[0])
                .fold(f64::INFINITY, f64::min)
                .floor()
                .max(0.0) as u32;
            let xmax = points
                .iter()
                .map(|p| p[0])
                .fold(f64::NEG_INFINITY, f64::max)
                .ceil()
                .min(w as f64) as u32;
            for y in ymin..ymax {
                for x in xmin..xmax {
                    bits[(y * w + x) as usize] = polygon_contains(points, x, y);
                }
            }
        }
    }
    bits
}

/// Every quantity the engine reports, as exact pixel counts.
#[derive(Debug, Default, PartialEq)]
pub struct Oracle {
    pub ssu_classes: Vec<ClassId>,
    pub assignment: Vec<Option<usize>>,
    pub gt_area: u64,
    pub negative_area: u64,
    pub covered: u64,
    pub overlap: u64,
    pub trespass: u64,
    pub excess: u64,
    pub pred_trespass: Vec<u64>,
    pub pred_excess: Vec<u64>,
    pub ssu_area: Vec<u64>,
    pub ssu_covered: Vec<u64>,
    pub classes: Vec<ClassId>,
    pub share_coverage: BTreeMap<ClassId, u64>,
    pub share_overlap: BTreeMap<ClassId, u64>,
    pub share_trespass: BTreeMap<ClassId, u64>,
    pub cm_coverage: Vec<Vec<u64>>,
    pub cm_overlap: Vec<Vec<u64>>,
    pub cm_trespass: Vec<Vec<u64>>,
    pub pred_class_area: Vec<u64>,
    pub overlap_class_area: Vec<u64>,
    /// Per pixel: number of assigned predictions covering it.
    pub multiplicity: Vec<u32>,
    /// Per pixel: owning SSU.
    pub owner: Vec<Option<usize>>,
}

/// SSUs as maximal reading-order runs of regions sharing class and units;
/// pixels claimed by several SSUs belong to the earliest.
pub fn oracle(canvas: PageCanvas, regions: &[GroundTruthRegion], preds: &[Prediction]) -> Oracle {
    let n_px = canvas.area() as usize;
    let mut ordered: Vec<&GroundTruthRegion> = regions.iter().collect();
    ordered.sort_by_key(|r| r.reading_order);
    let mut ssu_classes: Vec<ClassId> = Vec::new();
    let mut owner: Vec<Option<usize>> = vec![None; n_px];
    let mut prev: Option<&GroundTruthRegion> = None;
    for r in ordered {
        let joins = prev.is_some_and(|p| {
            p.class_id == r.class_id
                && p.structural_id.is_some()
                && p.semantic_id.is_some()
                && p.structural_id == r.structural_id
                && p.semantic_id == r.semantic_id
        });
        if !joins {
            ssu_classes.push(r.class_id);
        }
        let s = ssu_classes.len() - 1;
        for (k, b) in dense(&r.geometry, canvas).into_iter().enumerate() {
            if b && owner[k].is_none() {
                owner[k] = Some(s);
            }
        }
        prev = Some(r);
    }
    let n_ssu = ssu_classes.len();
    let pred_bits: Vec<Vec<bool>> = preds.iter().map(|p| dense(&p.geometry, canvas)).collect();

    let mut assignment = Vec::with_capacity(preds.len());
    for bits in &pred_bits {
        let mut inter = vec![0u64; n_ssu];
        for (k, &b) in bits.iter().enumerate() {
            if let (true, Some(s)) = (b, owner[k]) {
                inter[s] += 1;
            }
        }
        let mut best: Option<usize> = None;
        for s in 0..n_ssu {
            if inter[s] > 0 && best.is_none_or(|b| inter[s] > inter[b]) {
                best = Some(s);
            }
        }
        assignment.push(best);
    }

    let mut classes: Vec<ClassId> = ssu_classes
        .iter()
        .chain(preds.iter().map(|p| &p.class_id))
        .copied()
        .collect();
    classes.sort_unstable();
    classes.dedup();
    let ci = |c: ClassId| classes.iter().position(|&x| x == c).unwrap();
    let kc = classes.len();

    let mut o = Oracle {
        ssu_classes: ssu_classes.clone(),
        assignment: assignment.clone(),
        pred_trespass: vec![0; preds.len()],
        pred_excess: vec![0; preds.len()],
        ssu_area: vec![0; n_ssu],
        ssu_covered: vec![0; n_ssu],
        cm_coverage: vec![vec![0; kc]; kc],
        cm_overlap: vec![vec![0; kc]; kc],
        cm_trespass: vec![vec![0; kc]; kc],
        pred_class_area: vec![0; kc],
        overlap_class_area: vec![0; kc],
        multiplicity: vec![0; n_px],
        ..Oracle::default()
    };
    for &c in &classes {
        o.share_coverage.insert(c, 0);
        o.share_overlap.insert(c, 0);
        o.share_trespass.insert(c, 0);
    }

    for k in 0..n_px {
        let covering: Vec<usize> = (0..preds.len()).filter(|&j| pred_bits[j][k]).collect();
        let assigned: Vec<usize> = covering.iter().copied().filter(|&j| assignment[j].is_some()).collect();
        let m = assigned.len() as u64;
        o.multiplicity[k] = m as u32;
        let extra = m.saturating_sub(1);
        let mut class_present = vec![false; kc];
        for &j in &covering {
            class_present[ci(preds[j].class_id)] = true;
        }
        for (c, &present) in class_present.iter().enumerate() {
            if present {
                o.pred_class_area[c] += 1;
            }
        }
        match owner[k] {
            None => {
                o.negative_area += 1;
                if !covering.is_empty() {
                    o.excess += 1;
                }
                for &j in &covering {
                    o.pred_excess[j] += 1;
                }
            }
            Some(s) => {
                o.gt_area += 1;
                o.ssu_area[s] += 1;
                let l = ci(ssu_classes[s]);
                if !covering.is_empty() {
                    o.covered += 1;
                    o.ssu_covered[s] += 1;
                }
                o.overlap += extra;
                for c in 0..kc {
                    if !class_present[c] {
                        continue;
                    }
                    *o.share_coverage.get_mut(&classes[c]).unwrap() += 1;
                    *o.share_overlap.get_mut(&classes[c]).unwrap() += extra;
                    o.overlap_class_area[c] += extra;
                    o.cm_coverage[c][l] += 1;
                    for (c2, &present) in class_present.iter().enumerate() {
                        if present {
                            o.cm_overlap[c][c2] += extra;
                        }
                    }
                }
                for &j in &assigned {
                    if assignment[j] != Some(s) {
                        o.trespass += 1;
                        o.pred_trespass[j] += 1;
                        *o.share_trespass.get_mut(&preds[j].class_id).unwrap() += 1;
                        o.cm_trespass[ci(preds[j].class_id)][l] += 1;
                    }
                }
            }
        }
    }
    o.owner = owner;
    o.classes = classes;
    o
}
