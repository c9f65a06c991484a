//! Seeded fixtures shared by the benchmarks.

use cote_core::{
    group_regions_into_ssus, GroundTruthRegion, LabelledPage, OverlapPolicy, PageCanvas, Prediction, RegionGeometry,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// A page of `n_ssus` stacked text blocks, each split into a few line regions,
/// plus `n_preds` jittered boxes and polygons.
pub fn random_page(
    seed: u64,
    width: u32,
    height: u32,
    n_ssus: usize,
    n_preds: usize,
) -> (LabelledPage, Vec<Prediction>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let canvas = PageCanvas::new(width, height).expect("non-empty canvas");
    let (w, h) = (width as f64, height as f64);
    let band = h / n_ssus as f64;
    let mut regions = Vec::new();
    for s in 0..n_ssus {
        let top = s as f64 * band;
        let lines = rng.random_range(1..=4);
        let step = band * 0.8 / lines as f64;
        for l in 0..lines {
            let y0 = top + l as f64 * step;
            let x1 = w * rng.random_range(0.6..0.95);
            let g = RegionGeometry::bbox(w * 0.05, y0, x1, y0 + step * 0.8);
            regions.push(
                GroundTruthRegion::new(format!("r{s}_{l}"), g, 1, regions.len() as u32).with_units(1, s as i64 + 1),
            );
        }
    }
    let page = group_regions_into_ssus(&regions, canvas, OverlapPolicy::ClipToEarlier).expect("valid regions");
    let preds = (0..n_preds)
        .map(|i| {
            let cx = rng.random_range(0.0..w);
            let cy = rng.random_range(0.0..h);
            let rx = rng.random_range(w * 0.02..w * 0.4);
            let ry = rng.random_range(h * 0.01..h * 0.1);
            let g = if i % 3 == 0 {
                RegionGeometry::polygon([[cx - rx, cy], [cx, cy - ry], [cx + rx, cy], [cx, cy + ry]])
            } else {
                RegionGeometry::bbox(cx - rx, cy - ry, cx + rx, cy + ry)
            };
            Prediction::new(format!("p{i}"), g, 1, Some(0.5), canvas).expect("score in range")
        })
        .collect();
    (page, preds)
}
