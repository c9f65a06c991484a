//! Exact binary and multiplicity masks over the page pixel lattice.
//!
//! Masks are stored as per-row lists of half-open column intervals. Every
//! stored mask is canonical: spans in a row are sorted, non-empty, and neither
//! overlap nor touch, and leading/trailing empty rows are trimmed. Two masks
//! covering the same pixels therefore compare equal with `==`.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{CoteError, Result};

/// Page dimensions in pixels. Both sides are at least one pixel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "RawCanvas", into = "RawCanvas")]
pub struct PageCanvas {
    width: u32,
    height: u32,
}

#[derive(Serialize, Deserialize)]
struct RawCanvas {
    width: u32,
    height: u32,
}

impl TryFrom<RawCanvas> for PageCanvas {
    type Error = CoteError;

    fn try_from(raw: RawCanvas) -> Result<Self> {
        PageCanvas::new(raw.width, raw.height)
    }
}

impl From<PageCanvas> for RawCanvas {
    fn from(c: PageCanvas) -> Self {
        RawCanvas {
            width: c.width,
            height: c.height,
        }
    }
}

impl PageCanvas {
    pub fn new(width: u32, height: u32) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(CoteError::InvalidCanvas { width, height });
        }
        Ok(PageCanvas { width, height })
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    /// Total pixel count `H * W`.
    pub fn area(&self) -> u64 {
        self.width as u64 * self.height as u64
    }

    pub(crate) fn ensure_same(&self, other: &PageCanvas) -> Result<()> {
        if self != other {
            return Err(CoteError::CanvasMismatch {
                left: *self,
                right: *other,
            });
        }
        Ok(())
    }
}

impl fmt::Display for PageCanvas {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{}", self.width, self.height)
    }
}

/// Half-open column interval `[start, end)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Span {
    pub start: u32,
    pub end: u32,
}

impl Span {
    pub fn new(start: u32, end: u32) -> Self {
        debug_assert!(start < end);
        Span { start, end }
    }

    pub fn len(&self) -> u32 {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.start >= self.end
    }
}

/// Exact binary occupancy of a page.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct PixelMask {
    canvas: PageCanvas,
    /// Row index of `rows[0]`.
    first_row: u32,
    rows: Vec<Vec<Span>>,
}

impl PixelMask {
    pub fn empty(canvas: PageCanvas) -> Self {
        PixelMask {
            canvas,
            first_row: 0,
            rows: Vec::new(),
        }
    }

    pub fn full(canvas: PageCanvas) -> Self {
        let row = vec![Span::new(0, canvas.width)];
        PixelMask {
            canvas,
            first_row: 0,
            rows: vec![row; canvas.height as usize],
        }
    }

    /// Builds a mask from arbitrary (possibly unsorted, overlapping or
    /// out-of-canvas) spans per row. Rows outside the canvas are dropped and
    /// spans are clipped to `[0, W)`.
    pub fn from_row_spans<I>(canvas: PageCanvas, rows: I) -> Self
    where
        I: IntoIterator<Item = (u32, Vec<Span>)>,
    {
        let mut dense: Vec<Vec<Span>> = vec![Vec::new(); canvas.height as usize];
        for (y, mut spans) in rows {
            if y >= canvas.height {
                continue;
            }
            for s in &mut spans {
                s.end = s.end.min(canvas.width);
            }
            spans.retain(|s| s.start < s.end);
            let row = &mut dense[y as usize];
            row.extend(spans);
        }
        for row in &mut dense {
            normalize_row(row);
        }
        Self::from_dense_rows(canvas, 0, dense)
    }

    /// Builds a mask from a row-major boolean grid of exactly `H * W` cells.
    pub fn from_bitmap(canvas: PageCanvas, bits: &[bool]) -> Self {
        assert_eq!(bits.len() as u64, canvas.area(), "bitmap size mismatch");
        let w = canvas.width as usize;
        let rows = bits.chunks(w).enumerate().map(|(y, row)| {
            let mut spans = Vec::new();
            let mut x = 0;
            while x < w {
                if row[x] {
                    let start = x;
                    while x < w && row[x] {
                        x += 1;
                    }
                    spans.push(Span::new(start as u32, x as u32));
                } else {
                    x += 1;
                }
            }
            (y as u32, spans)
        });
        Self::from_row_spans(canvas, rows)
    }

    /// Rows must already be canonical.
    pub(crate) fn from_dense_rows(canvas: PageCanvas, first_row: u32, mut rows: Vec<Vec<Span>>) -> Self {
        let lead = rows.iter().take_while(|r| r.is_empty()).count();
        if lead == rows.len() {
            return Self::empty(canvas);
        }
        let trail = rows.iter().rev().take_while(|r| r.is_empty()).count();
        rows.truncate(rows.len() - trail);
        rows.drain(..lead);
        PixelMask {
            canvas,
            first_row: first_row + lead as u32,
            rows,
        }
    }

    pub fn canvas(&self) -> PageCanvas {
        self.canvas
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Spans of row `y`; empty outside the occupied range.
    pub fn row(&self, y: u32) -> &[Span] {
        if y < self.first_row {
            return &[];
        }
        self.rows
            .get((y - self.first_row) as usize)
            .map(Vec::as_slice)
            .unwrap_or(&[])
    }

    /// Occupied row range `[first, end)`.
    pub fn row_range(&self) -> std::ops::Range<u32> {
        self.first_row..self.first_row + self.rows.len() as u32
    }

    pub fn iter_rows(&self) -> impl Iterator<Item = (u32, &[Span])> {
        self.rows
            .iter()
            .enumerate()
            .map(move |(i, r)| (self.first_row + i as u32, r.as_slice()))
    }

    pub fn contains(&self, x: u32, y: u32) -> bool {
        self.row(y).iter().any(|s| s.start <= x && x < s.end)
    }

    pub fn area(&self) -> u64 {
        self.rows.iter().flatten().map(|s| s.len() as u64).sum()
    }

    /// Number of stored intervals.
    pub fn span_count(&self) -> usize {
        self.rows.iter().map(Vec::len).sum()
    }

    /// Horizontal extent `[min_x, max_x)` of the occupied pixels.
    pub fn x_extent(&self) -> Option<(u32, u32)> {
        let min = self.rows.iter().filter_map(|r| r.first()).map(|s| s.start).min()?;
        let max = self.rows.iter().filter_map(|r| r.last()).map(|s| s.end).max()?;
        Some((min, max))
    }

    pub fn intersect_area(&self, other: &PixelMask) -> Result<u64> {
        self.canvas.ensure_same(&other.canvas)?;
        let lo = self.first_row.max(other.first_row);
        let hi = self.row_range().end.min(other.row_range().end);
        let mut total = 0u64;
        for y in lo..hi {
            total += intersect_len(self.row(y), other.row(y));
        }
        Ok(total)
    }

    pub fn intersect(&self, other: &PixelMask) -> Result<PixelMask> {
        self.canvas.ensure_same(&other.canvas)?;
        let lo = self.first_row.max(other.first_row);
        let hi = self.row_range().end.min(other.row_range().end);
        if lo >= hi {
            return Ok(PixelMask::empty(self.canvas));
        }
        let rows = (lo..hi).map(|y| intersect_spans(self.row(y), other.row(y))).collect();
        Ok(PixelMask::from_dense_rows(self.canvas, lo, rows))
    }

    pub fn union(&self, other: &PixelMask) -> Result<PixelMask> {
        union(self.canvas, [self, other])
    }

    pub fn subtract(&self, other: &PixelMask) -> Result<PixelMask> {
        self.canvas.ensure_same(&other.canvas)?;
        if self.is_empty() {
            return Ok(self.clone());
        }
        let range = self.row_range();
        let rows = range
            .clone()
            .map(|y| subtract_spans(self.row(y), other.row(y)))
            .collect();
        Ok(PixelMask::from_dense_rows(self.canvas, range.start, rows))
    }

    /// Canvas minus this mask.
    pub fn complement(&self) -> PixelMask {
        let full = [Span::new(0, self.canvas.width)];
        let rows = (0..self.canvas.height)
            .map(|y| subtract_spans(&full, self.row(y)))
            .collect();
        PixelMask::from_dense_rows(self.canvas, 0, rows)
    }

    /// Row-major dense rendering, `H * W` cells.
    pub fn to_bitmap(&self) -> Vec<bool> {
        let w = self.canvas.width as usize;
        let mut bits = vec![false; self.canvas.area() as usize];
        for (y, spans) in self.iter_rows() {
            let base = y as usize * w;
            for s in spans {
                bits[base + s.start as usize..base + s.end as usize].fill(true);
            }
        }
        bits
    }
}

/// Union of any number of masks sharing `canvas`.
pub fn union<'a, I>(canvas: PageCanvas, masks: I) -> Result<PixelMask>
where
    I: IntoIterator<Item = &'a PixelMask>,
{
    let masks: Vec<&PixelMask> = masks.into_iter().collect();
    for m in &masks {
        canvas.ensure_same(&m.canvas)?;
    }
    let Some(lo) = masks.iter().filter(|m| !m.is_empty()).map(|m| m.first_row).min() else {
        return Ok(PixelMask::empty(canvas));
    };
    let hi = masks.iter().map(|m| m.row_range().end).max().unwrap_or(lo);
    let rows = (lo..hi)
        .map(|y| {
            let mut row: Vec<Span> = masks.iter().flat_map(|m| m.row(y).iter().copied()).collect();
            normalize_row(&mut row);
            row
        })
        .collect();
    Ok(PixelMask::from_dense_rows(canvas, lo, rows))
}

/// Sorts and merges overlapping or touching spans in place.
fn normalize_row(row: &mut Vec<Span>) {
    row.retain(|s| s.start < s.end);
    if row.len() < 2 {
        return;
    }
    row.sort_unstable_by_key(|s| (s.start, s.end));
    let mut out: Vec<Span> = Vec::with_capacity(row.len());
    for s in row.drain(..) {
        match out.last_mut() {
            Some(last) if s.start <= last.end => last.end = last.end.max(s.end),
            _ => out.push(s),
        }
    }
    *row = out;
}

fn intersect_len(a: &[Span], b: &[Span]) -> u64 {
    let (mut i, mut j) = (0, 0);
    let mut total = 0u64;
    while i < a.len() && j < b.len() {
        let start = a[i].start.max(b[j].start);
        let end = a[i].end.min(b[j].end);
        if start < end {
            total += (end - start) as u64;
        }
        if a[i].end < b[j].end {
            i += 1;
        } else {
            j += 1;
        }
    }
    total
}

fn intersect_spans(a: &[Span], b: &[Span]) -> Vec<Span> {
    let (mut i, mut j) = (0, 0);
    let mut out = Vec::new();
    while i < a.len() && j < b.len() {
        let start = a[i].start.max(b[j].start);
        let end = a[i].end.min(b[j].end);
        if start < end {
            out.push(Span::new(start, end));
        }
        if a[i].end < b[j].end {
            i += 1;
        } else {
            j += 1;
        }
    }
    // Inputs are canonical, so pieces are disjoint and never touch.
    out
}

fn subtract_spans(a: &[Span], b: &[Span]) -> Vec<Span> {
    let mut out = Vec::new();
    let mut j = 0;
    for s in a {
        let mut cur = s.start;
        while j < b.len() && b[j].end <= cur {
            j += 1;
        }
        let mut k = j;
        while k < b.len() && b[k].start < s.end {
            if b[k].start > cur {
                out.push(Span::new(cur, b[k].start));
            }
            cur = cur.max(b[k].end);
            k += 1;
        }
        if cur < s.end {
            out.push(Span::new(cur, s.end));
        }
    }
    out
}

/// Interval with a per-pixel multiplicity.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CountSpan {
    pub start: u32,
    pub end: u32,
    pub count: u32,
}

/// Per-pixel multiplicities of a stack of binary masks. Zero-count pixels
/// are not stored.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CountMask {
    canvas: PageCanvas,
    first_row: u32,
    rows: Vec<Vec<CountSpan>>,
    layers: usize,
}

impl CountMask {
    pub fn canvas(&self) -> PageCanvas {
        self.canvas
    }

    /// Number of masks that were stacked.
    pub fn layers(&self) -> usize {
        self.layers
    }

    pub fn row(&self, y: u32) -> &[CountSpan] {
        if y < self.first_row {
            return &[];
        }
        self.rows
            .get((y - self.first_row) as usize)
            .map(Vec::as_slice)
            .unwrap_or(&[])
    }

    pub fn count_at(&self, x: u32, y: u32) -> u32 {
        self.row(y)
            .iter()
            .find(|s| s.start <= x && x < s.end)
            .map_or(0, |s| s.count)
    }

    pub fn max_count(&self) -> u32 {
        self.rows.iter().flatten().map(|s| s.count).max().unwrap_or(0)
    }

    /// Sum of multiplicities over every pixel.
    pub fn total(&self) -> u64 {
        self.rows
            .iter()
            .flatten()
            .map(|s| (s.end - s.start) as u64 * s.count as u64)
            .sum()
    }

    /// Pixels with multiplicity at least one.
    pub fn binarize(&self) -> PixelMask {
        let rows = self
            .rows
            .iter()
            .map(|r| {
                let mut spans: Vec<Span> = r.iter().map(|s| Span::new(s.start, s.end)).collect();
                normalize_row(&mut spans);
                spans
            })
            .collect();
        PixelMask::from_dense_rows(self.canvas, self.first_row, rows)
    }

    /// `sum over pixels in within of max(count - 1, 0)`.
    pub fn multiplicity_excess_area(&self, within: &PixelMask) -> Result<u64> {
        self.canvas.ensure_same(&within.canvas)?;
        let mut total = 0u64;
        for (i, row) in self.rows.iter().enumerate() {
            let y = self.first_row + i as u32;
            let clip = within.row(y);
            if clip.is_empty() {
                continue;
            }
            let mut j = 0;
            for s in row.iter().filter(|s| s.count > 1) {
                while j < clip.len() && clip[j].end <= s.start {
                    j += 1;
                }
                let mut k = j;
                while k < clip.len() && clip[k].start < s.end {
                    let start = s.start.max(clip[k].start);
                    let end = s.end.min(clip[k].end);
                    if start < end {
                        total += (end - start) as u64 * (s.count - 1) as u64;
                    }
                    k += 1;
                }
            }
        }
        Ok(total)
    }
}

/// Per-pixel sum of `masks`.
pub fn stack<'a, I>(canvas: PageCanvas, masks: I) -> Result<CountMask>
where
    I: IntoIterator<Item = &'a PixelMask>,
{
    let masks: Vec<&PixelMask> = masks.into_iter().collect();
    for m in &masks {
        canvas.ensure_same(&m.canvas)?;
    }
    let layers = masks.len();
    let Some(lo) = masks.iter().filter(|m| !m.is_empty()).map(|m| m.first_row).min() else {
        return Ok(CountMask {
            canvas,
            first_row: 0,
            rows: Vec::new(),
            layers,
        });
    };
    let hi = masks.iter().map(|m| m.row_range().end).max().unwrap_or(lo);
    let mut events: Vec<(u32, i32)> = Vec::new();
    let mut rows = Vec::with_capacity((hi - lo) as usize);
    for y in lo..hi {
        events.clear();
        for m in &masks {
            for s in m.row(y) {
                events.push((s.start, 1));
                events.push((s.end, -1));
            }
        }
        events.sort_unstable();
        let mut row = Vec::new();
        let mut depth = 0i32;
        let mut i = 0;
        while i < events.len() {
            let x = events[i].0;
            while i < events.len() && events[i].0 == x {
                depth += events[i].1;
                i += 1;
            }
            if depth > 0 {
                if let Some(&(next, _)) = events.get(i) {
                    row.push(CountSpan {
                        start: x,
                        end: next,
                        count: depth as u32,
                    });
                }
            }
        }
        rows.push(row);
    }
    let lead = rows.iter().take_while(|r| r.is_empty()).count();
    let trail = rows.iter().rev().take_while(|r| r.is_empty()).count();
    rows.truncate(rows.len() - trail);
    rows.drain(..lead);
    Ok(CountMask {
        canvas,
        first_row: lo + lead as u32,
        rows,
        layers,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn canvas(w: u32, h: u32) -> PageCanvas {
        PageCanvas::new(w, h).unwrap()
    }

    fn rect(c: PageCanvas, x0: u32, y0: u32, x1: u32, y1: u32) -> PixelMask {
        PixelMask::from_row_spans(c, (y0..y1).map(|y| (y, vec![Span::new(x0, x1)])))
    }

    #[test]
    fn zero_sized_canvas_is_rejected() {
        assert!(PageCanvas::new(0, 10).is_err());
        assert!(PageCanvas::new(10, 0).is_err());
    }

    #[test]
    fn empty_and_full_areas() {
        let c = canvas(100, 100);
        assert_eq!(PixelMask::empty(c).area(), 0);
        assert_eq!(PixelMask::full(c).area(), 10_000);
        assert!(PixelMask::full(c).complement().is_empty());
    }

    #[test]
    fn rows_are_canonicalized() {
        let c = canvas(20, 3);
        let m = PixelMask::from_row_spans(
            c,
            [(
                1,
                vec![Span::new(5, 8), Span::new(0, 3), Span::new(3, 5), Span::new(10, 30)],
            )],
        );
        assert_eq!(m.row(1), &[Span::new(0, 8), Span::new(10, 20)]);
        assert_eq!(m.row_range(), 1..2);
        assert_eq!(m.area(), 18);
    }

    #[test]
    fn disjoint_and_identical_intersections() {
        let c = canvas(50, 50);
        let a = rect(c, 0, 0, 10, 10);
        let b = rect(c, 20, 20, 30, 30);
        assert_eq!(a.intersect_area(&b).unwrap(), 0);
        assert_eq!(a.intersect_area(&a).unwrap(), 100);
    }

    #[test]
    fn canvas_mismatch_is_an_error() {
        let a = PixelMask::full(canvas(10, 10));
        let b = PixelMask::full(canvas(10, 11));
        assert!(matches!(a.intersect_area(&b), Err(CoteError::CanvasMismatch { .. })));
        assert!(stack(canvas(10, 10), [&a, &b]).is_err());
    }

    #[test]
    fn subtract_and_complement_partition() {
        let c = canvas(40, 40);
        let a = rect(c, 5, 5, 25, 25);
        let b = rect(c, 10, 0, 15, 40);
        let d = a.subtract(&b).unwrap();
        assert_eq!(d.area(), 400 - 100);
        let full = a.union(&a.complement()).unwrap();
        assert_eq!(full, PixelMask::full(c));
    }

    #[test]
    fn stack_counts_duplicates() {
        let c = canvas(30, 30);
        let a = rect(c, 0, 0, 10, 10);
        let single = stack(c, [&a]).unwrap();
        assert_eq!(single.max_count(), 1);
        let double = stack(c, [&a, &a]).unwrap();
        assert_eq!(double.max_count(), 2);
        assert_eq!(double.count_at(5, 5), 2);
        assert_eq!(double.binarize(), a);
        let gt = rect(c, 0, 0, 20, 20);
        assert_eq!(single.multiplicity_excess_area(&gt).unwrap(), 0);
        assert_eq!(double.multiplicity_excess_area(&gt).unwrap(), 100);
    }

    #[test]
    fn empty_stack() {
        let c = canvas(5, 5);
        let s = stack(c, std::iter::empty()).unwrap();
        assert_eq!(s.total(), 0);
        assert!(s.binarize().is_empty());
    }
}
