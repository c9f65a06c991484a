//! Region shapes and their rasterization onto the page lattice.
//!
//! Boxes round each coordinate to the nearest integer (ties away from zero)
//! and cover the half-open pixel set `[x0, x1) x [y0, y1)`. Polygons are
//! filled with the even-odd rule, sampling each pixel at its center
//! `(x + 0.5, y + 0.5)`. Everything is clipped to the canvas; degenerate or
//! non-finite input yields an empty mask.

use serde::{Deserialize, Serialize};

use crate::mask::{PageCanvas, PixelMask, Span};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum RegionGeometry {
    Box { x0: f64, y0: f64, x1: f64, y1: f64 },
    Polygon { points: Vec<[f64; 2]> },
}

impl RegionGeometry {
    pub fn bbox(x0: f64, y0: f64, x1: f64, y1: f64) -> Self {
        RegionGeometry::Box { x0, y0, x1, y1 }
    }

    pub fn polygon(points: impl IntoIterator<Item = [f64; 2]>) -> Self {
        RegionGeometry::Polygon {
            points: points.into_iter().collect(),
        }
    }

    /// `(min_x, min_y, max_x, max_y)` of the raw coordinates.
    pub fn bounds(&self) -> Option<(f64, f64, f64, f64)> {
        match self {
            RegionGeometry::Box { x0, y0, x1, y1 } => Some((x0.min(*x1), y0.min(*y1), x0.max(*x1), y0.max(*y1))),
            RegionGeometry::Polygon { points } => {
                let first = points.first()?;
                Some(
                    points
                        .iter()
                        .fold((first[0], first[1], first[0], first[1]), |(a, b, c, d), p| {
                            (a.min(p[0]), b.min(p[1]), c.max(p[0]), d.max(p[1]))
                        }),
                )
            }
        }
    }

    pub fn rasterize(&self, canvas: PageCanvas) -> PixelMask {
        rasterize(self, canvas)
    }
}

pub fn rasterize(geometry: &RegionGeometry, canvas: PageCanvas) -> PixelMask {
    match geometry {
        RegionGeometry::Box { x0, y0, x1, y1 } => rasterize_box(canvas, *x0, *y0, *x1, *y1),
        RegionGeometry::Polygon { points } => rasterize_polygon(canvas, points),
    }
}

fn clip_round(v: f64, max: u32) -> u32 {
    v.round().clamp(0.0, max as f64) as u32
}

fn rasterize_box(canvas: PageCanvas, x0: f64, y0: f64, x1: f64, y1: f64) -> PixelMask {
    if ![x0, y0, x1, y1].iter().all(|v| v.is_finite()) {
        return PixelMask::empty(canvas);
    }
    let (cx0, cx1) = (clip_round(x0, canvas.width()), clip_round(x1, canvas.width()));
    let (cy0, cy1) = (clip_round(y0, canvas.height()), clip_round(y1, canvas.height()));
    if cx0 >= cx1 || cy0 >= cy1 {
        return PixelMask::empty(canvas);
    }
    PixelMask::from_row_spans(canvas, (cy0..cy1).map(|y| (y, vec![Span::new(cx0, cx1)])))
}

/// Smallest integer `x` with `x + 0.5 >= a`, clamped to `[0, max]`.
fn first_center_at_or_after(a: f64, max: u32) -> u32 {
    let a = a.clamp(-2.0, max as f64 + 2.0);
    let mut s = (a - 0.5).ceil();
    while s + 0.5 < a {
        s += 1.0;
    }
    while (s - 1.0) + 0.5 >= a {
        s -= 1.0;
    }
    s.clamp(0.0, max as f64) as u32
}

fn rasterize_polygon(canvas: PageCanvas, points: &[[f64; 2]]) -> PixelMask {
    if points.len() < 3 || !points.iter().flatten().all(|v| v.is_finite()) {
        return PixelMask::empty(canvas);
    }
    let (min_y, max_y) = points.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| {
        (lo.min(p[1]), hi.max(p[1]))
    });
    let y_start = first_center_at_or_after(min_y, canvas.height());
    let y_end = first_center_at_or_after(max_y, canvas.height());
    let n = points.len();
    let mut crossings: Vec<f64> = Vec::new();
    let rows = (y_start..y_end).map(|y| {
        let yc = y as f64 + 0.5;
        crossings.clear();
        for i in 0..n {
            let [xi, yi] = points[i];
            let [xj, yj] = points[(i + 1) % n];
            if (yi > yc) != (yj > yc) {
                crossings.push(xi + (yc - yi) * (xj - xi) / (yj - yi));
            }
        }
        crossings.sort_by(f64::total_cmp);
        let spans = crossings
            .chunks_exact(2)
            .filter_map(|pair| {
                let start = first_center_at_or_after(pair[0], canvas.width());
                let end = first_center_at_or_after(pair[1], canvas.width());
                (start < end).then(|| Span::new(start, end))
            })
            .collect();
        (y, spans)
    });
    PixelMask::from_row_spans(canvas, rows.collect::<Vec<_>>())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn canvas(w: u32, h: u32) -> PageCanvas {
        PageCanvas::new(w, h).unwrap()
    }

    #[test]
    fn box_area_and_clipping() {
        let c = canvas(100, 100);
        assert_eq!(RegionGeometry::bbox(0.0, 0.0, 10.0, 10.0).rasterize(c).area(), 100);
        assert_eq!(RegionGeometry::bbox(-5.0, -5.0, 5.0, 5.0).rasterize(c).area(), 25);
        assert_eq!(RegionGeometry::bbox(95.0, 95.0, 120.0, 130.0).rasterize(c).area(), 25);
    }

    #[test]
    fn box_rounds_to_nearest() {
        let c = canvas(100, 100);
        let m = RegionGeometry::bbox(0.4, 0.5, 10.49, 10.6).rasterize(c);
        // x: [0, 10), y: [1, 11)
        assert_eq!(m.row_range(), 1..11);
        assert_eq!(m.row(1), &[Span::new(0, 10)]);
    }

    #[test]
    fn degenerate_geometry_is_empty() {
        let c = canvas(50, 50);
        assert!(RegionGeometry::bbox(10.0, 10.0, 10.0, 20.0).rasterize(c).is_empty());
        assert!(RegionGeometry::bbox(60.0, 60.0, 70.0, 70.0).rasterize(c).is_empty());
        assert!(RegionGeometry::bbox(f64::NAN, 0.0, 5.0, 5.0).rasterize(c).is_empty());
        assert!(RegionGeometry::polygon([[0.0, 0.0], [10.0, 10.0]])
            .rasterize(c)
            .is_empty());
    }

    #[test]
    fn rectangle_polygon_matches_box() {
        let c = canvas(64, 64);
        let b = RegionGeometry::bbox(3.0, 7.0, 40.0, 22.0).rasterize(c);
        let p = RegionGeometry::polygon([[3.0, 7.0], [40.0, 7.0], [40.0, 22.0], [3.0, 22.0]]).rasterize(c);
        assert_eq!(b, p);
    }

    #[test]
    fn triangle_area() {
        let c = canvas(20, 20);
        // Right triangle with legs of 10: pixel centers below the hypotenuse.
        let m = RegionGeometry::polygon([[0.0, 0.0], [10.0, 0.0], [0.0, 10.0]]).rasterize(c);
        // Row y has centers x + 0.5 < 10 - (y + 0.5), i.e. 9 - y pixels.
        assert_eq!(m.area(), (0..10).map(|y| 9 - y).sum::<u64>());
    }

    #[test]
    fn self_intersecting_even_odd() {
        let c = canvas(40, 40);
        // Two overlapping squares traced as one ring; the shared area is a hole.
        let ring = RegionGeometry::polygon([
            [0.0, 0.0],
            [20.0, 0.0],
            [20.0, 20.0],
            [10.0, 20.0],
            [10.0, 10.0],
            [30.0, 10.0],
            [30.0, 30.0],
            [10.0, 30.0],
            [10.0, 20.0],
            [0.0, 20.0],
        ]);
        let m = ring.rasterize(c);
        assert!(!m.contains(15, 15));
        assert!(m.contains(5, 5));
        assert!(m.contains(25, 25));
    }

    #[test]
    fn rasterize_is_deterministic() {
        let c = canvas(64, 64);
        let g = RegionGeometry::polygon([[1.3, 2.7], [50.2, 8.9], [33.3, 60.1], [4.4, 41.0]]);
        assert_eq!(g.rasterize(c), g.rasterize(c));
    }
}
