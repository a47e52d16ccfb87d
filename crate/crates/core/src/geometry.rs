//! Exact rectangle arithmetic on half-open integer pixel boxes.
//!
//! A [`BBox`] covers the pixels `[x1, x2) × [y1, y2)`, so abutting boxes
//! share no pixels and areas are exact integer products. Unions of box sets
//! are measured by coordinate compression, never by rasterization.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeometryError {
    #[error("degenerate box ({x1},{y1},{x2},{y2}): need x1 < x2 and y1 < y2")]
    Degenerate { x1: i64, y1: i64, x2: i64, y2: i64 },
    #[error("negative coordinate in box ({x1},{y1},{x2},{y2})")]
    Negative { x1: i64, y1: i64, x2: i64, y2: i64 },
    #[error("relative box ({0}, {1}, {2}, {3}) is outside [0, {4}] or not ordered")]
    InvalidRelative(f64, f64, f64, f64, f64),
    #[error("relative scale must be positive and finite, got {0}")]
    InvalidScale(f64),
    #[error("invalid patch grid {rows}x{cols} for a {image_w}x{image_h} image")]
    InvalidGrid {
        rows: u32,
        cols: u32,
        image_w: u32,
        image_h: u32,
    },
    #[error("patch ({row}, {col}) outside a {rows}x{cols} grid")]
    PatchOutOfRange { row: u32, col: u32, rows: u32, cols: u32 },
    #[error("mask has {got} bits but grid has {expected} patches")]
    MaskLength { expected: usize, got: usize },
}

/// Axis-aligned pixel rectangle `[x1, x2) × [y1, y2)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "[i64; 4]", into = "[u32; 4]")]
pub struct BBox {
    x1: u32,
    y1: u32,
    x2: u32,
    y2: u32,
}

impl BBox {
    pub fn new(x1: u32, y1: u32, x2: u32, y2: u32) -> Result<Self, GeometryError> {
        if x1 >= x2 || y1 >= y2 {
            return Err(GeometryError::Degenerate {
                x1: x1.into(),
                y1: y1.into(),
                x2: x2.into(),
                y2: y2.into(),
            });
        }
        Ok(Self { x1, y1, x2, y2 })
    }

    /// Builds a box from signed coordinates, rejecting negatives.
    pub fn from_signed(x1: i64, y1: i64, x2: i64, y2: i64) -> Result<Self, GeometryError> {
        if x1 < 0 || y1 < 0 || x2 < 0 || y2 < 0 {
            return Err(GeometryError::Negative { x1, y1, x2, y2 });
        }
        if x1 >= x2 || y1 >= y2 {
            return Err(GeometryError::Degenerate { x1, y1, x2, y2 });
        }
        let c = |v: i64| u32::try_from(v).unwrap_or(u32::MAX);
        Self::new(c(x1), c(y1), c(x2), c(y2))
    }

    pub fn x1(&self) -> u32 {
        self.x1
    }
    pub fn y1(&self) -> u32 {
        self.y1
    }
    pub fn x2(&self) -> u32 {
        self.x2
    }
    pub fn y2(&self) -> u32 {
        self.y2
    }
    pub fn width(&self) -> u32 {
        self.x2 - self.x1
    }
    pub fn height(&self) -> u32 {
        self.y2 - self.y1
    }

    pub fn coords(&self) -> [u32; 4] {
        [self.x1, self.y1, self.x2, self.y2]
    }

    pub fn area(&self) -> u64 {
        u64::from(self.width()) * u64::from(self.height())
    }

    /// Overlap rectangle, or `None` when the overlap has zero area.
    pub fn intersect(&self, other: &BBox) -> Option<BBox> {
        let x1 = self.x1.max(other.x1);
        let y1 = self.y1.max(other.y1);
        let x2 = self.x2.min(other.x2);
        let y2 = self.y2.min(other.y2);
        BBox::new(x1, y1, x2, y2).ok()
    }

    pub fn within(&self, image_w: u32, image_h: u32) -> bool {
        self.x2 <= image_w && self.y2 <= image_h
    }
}

impl TryFrom<[i64; 4]> for BBox {
    type Error = GeometryError;

    fn try_from(c: [i64; 4]) -> Result<Self, Self::Error> {
        BBox::from_signed(c[0], c[1], c[2], c[3])
    }
}

impl From<BBox> for [u32; 4] {
    fn from(b: BBox) -> Self {
        b.coords()
    }
}

pub fn area(b: &BBox) -> u64 {
    b.area()
}

pub fn intersect(a: &BBox, b: &BBox) -> Option<BBox> {
    a.intersect(b)
}

/// Exact pixel counts of two rectangle-set unions and their overlap.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct RegionAreas {
    pub pred: u64,
    pub gt: u64,
    pub intersection: u64,
    pub union: u64,
}

impl RegionAreas {
    /// `intersection / union`, with 0 for an empty union.
    pub fn iou(&self) -> f64 {
        if self.union == 0 {
            0.0
        } else {
            self.intersection as f64 / self.union as f64
        }
    }
}

/// Coverage counts over a compressed grid, built from 2-D difference arrays.
struct Coverage {
    xs: Vec<u32>,
    ys: Vec<u32>,
    pred: Vec<i32>,
    gt: Vec<i32>,
}

impl Coverage {
    fn build(pred: &[BBox], gt: &[BBox]) -> Self {
        let mut xs: Vec<u32> = pred.iter().chain(gt).flat_map(|b| [b.x1, b.x2]).collect();
        let mut ys: Vec<u32> = pred.iter().chain(gt).flat_map(|b| [b.y1, b.y2]).collect();
        xs.sort_unstable();
        xs.dedup();
        ys.sort_unstable();
        ys.dedup();
        Self {
            pred: Self::count(pred, &xs, &ys),
            gt: Self::count(gt, &xs, &ys),
            xs,
            ys,
        }
    }

    fn count(boxes: &[BBox], xs: &[u32], ys: &[u32]) -> Vec<i32> {
        let nx = xs.len();
        let ny = ys.len();
        // (nx × ny) difference array; cell (i, j) spans [xs[i], xs[i+1]) × [ys[j], ys[j+1]).
        let mut diff = vec![0i32; nx * ny];
        let idx = |v: u32, axis: &[u32]| axis.binary_search(&v).expect("boundary present");
        for b in boxes {
            let (i1, i2) = (idx(b.x1, xs), idx(b.x2, xs));
            let (j1, j2) = (idx(b.y1, ys), idx(b.y2, ys));
            diff[i1 * ny + j1] += 1;
            diff[i2 * ny + j1] -= 1;
            diff[i1 * ny + j2] -= 1;
            diff[i2 * ny + j2] += 1;
        }
        for i in 0..nx {
            for j in 1..ny {
                diff[i * ny + j] += diff[i * ny + j - 1];
            }
        }
        for i in 1..nx {
            for j in 0..ny {
                diff[i * ny + j] += diff[(i - 1) * ny + j];
            }
        }
        diff
    }

    fn areas(&self) -> RegionAreas {
        let ny = self.ys.len();
        let mut out = RegionAreas::default();
        for i in 0..self.xs.len().saturating_sub(1) {
            let w = u64::from(self.xs[i + 1] - self.xs[i]);
            for j in 0..ny.saturating_sub(1) {
                let cell = w * u64::from(self.ys[j + 1] - self.ys[j]);
                let p = self.pred[i * ny + j] > 0;
                let g = self.gt[i * ny + j] > 0;
                if p {
                    out.pred += cell;
                }
                if g {
                    out.gt += cell;
                }
                if p && g {
                    out.intersection += cell;
                }
                if p || g {
                    out.union += cell;
                }
            }
        }
        out
    }
}

/// Pixel counts of `∪pred`, `∪gt`, their intersection and their union.
pub fn region_areas(pred: &[BBox], gt: &[BBox]) -> RegionAreas {
    if pred.is_empty() && gt.is_empty() {
        return RegionAreas::default();
    }
    Coverage::build(pred, gt).areas()
}

/// Pixel area of the union of a box set.
pub fn union_area(boxes: &[BBox]) -> u64 {
    region_areas(boxes, &[]).pred
}

/// Pixel-level IoU of two box sets; 0 when both are empty.
pub fn pixel_iou(pred: &[BBox], gt: &[BBox]) -> f64 {
    region_areas(pred, gt).iou()
}

/// Box expressed as fractions of the image on a declared scale.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RelBox {
    pub rx1: f64,
    pub ry1: f64,
    pub rx2: f64,
    pub ry2: f64,
    pub scale: f64,
}

impl RelBox {
    pub fn new(rx1: f64, ry1: f64, rx2: f64, ry2: f64, scale: f64) -> Result<Self, GeometryError> {
        if !(scale.is_finite() && scale > 0.0) {
            return Err(GeometryError::InvalidScale(scale));
        }
        let in_range = |v: f64| v.is_finite() && (0.0..=scale).contains(&v);
        if !(in_range(rx1) && in_range(ry1) && in_range(rx2) && in_range(ry2)) || rx1 >= rx2 || ry1 >= ry2 {
            return Err(GeometryError::InvalidRelative(rx1, ry1, rx2, ry2, scale));
        }
        Ok(Self {
            rx1,
            ry1,
            rx2,
            ry2,
            scale,
        })
    }
}

fn rel_coord(v: f64, dim: u32, scale: f64) -> u32 {
    // f64::round rounds half away from zero.
    let px = (v * f64::from(dim) / scale).round();
    px.clamp(0.0, f64::from(dim)) as u32
}

/// Converts a relative box to pixels, rounding half away from zero.
pub fn rel_to_abs(r: &RelBox, image_w: u32, image_h: u32) -> Result<BBox, GeometryError> {
    BBox::new(
        rel_coord(r.rx1, image_w, r.scale),
        rel_coord(r.ry1, image_h, r.scale),
        rel_coord(r.rx2, image_w, r.scale),
        rel_coord(r.ry2, image_h, r.scale),
    )
}

/// Uniform patch grid laid over an image.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PatchGrid {
    rows: u32,
    cols: u32,
    image_w: u32,
    image_h: u32,
}

impl PatchGrid {
    pub const DEFAULT_SIDE: u32 = 32;

    pub fn new(rows: u32, cols: u32, image_w: u32, image_h: u32) -> Result<Self, GeometryError> {
        if rows == 0 || cols == 0 || image_w < cols || image_h < rows {
            return Err(GeometryError::InvalidGrid {
                rows,
                cols,
                image_w,
                image_h,
            });
        }
        Ok(Self {
            rows,
            cols,
            image_w,
            image_h,
        })
    }

    /// The default 32×32 grid.
    pub fn square(image_w: u32, image_h: u32) -> Result<Self, GeometryError> {
        Self::new(Self::DEFAULT_SIDE, Self::DEFAULT_SIDE, image_w, image_h)
    }

    pub fn rows(&self) -> u32 {
        self.rows
    }
    pub fn cols(&self) -> u32 {
        self.cols
    }
    pub fn image_w(&self) -> u32 {
        self.image_w
    }
    pub fn image_h(&self) -> u32 {
        self.image_h
    }

    pub fn len(&self) -> usize {
        self.rows as usize * self.cols as usize
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// `(row, col)` of a row-major patch index.
    pub fn position(&self, index: usize) -> (u32, u32) {
        let cols = self.cols as usize;
        ((index / cols) as u32, (index % cols) as u32)
    }

    pub fn index(&self, row: u32, col: u32) -> usize {
        row as usize * self.cols as usize + col as usize
    }

    pub fn patch_rect(&self, row: u32, col: u32) -> Result<BBox, GeometryError> {
        if row >= self.rows || col >= self.cols {
            return Err(GeometryError::PatchOutOfRange {
                row,
                col,
                rows: self.rows,
                cols: self.cols,
            });
        }
        let edge = |i: u32, dim: u32, n: u32| (u64::from(i) * u64::from(dim) / u64::from(n)) as u32;
        BBox::new(
            edge(col, self.image_w, self.cols),
            edge(row, self.image_h, self.rows),
            edge(col + 1, self.image_w, self.cols),
            edge(row + 1, self.image_h, self.rows),
        )
    }

    /// Rectangle of a row-major patch index.
    pub fn patch_rect_at(&self, index: usize) -> Result<BBox, GeometryError> {
        let (row, col) = self.position(index);
        self.patch_rect(row, col)
    }
}

pub fn patch_rect(row: u32, col: u32, grid: &PatchGrid) -> Result<BBox, GeometryError> {
    grid.patch_rect(row, col)
}

/// One flag per patch, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PatchMask {
    rows: u32,
    cols: u32,
    bits: Vec<bool>,
}

impl PatchMask {
    pub fn from_bits(rows: u32, cols: u32, bits: Vec<bool>) -> Result<Self, GeometryError> {
        let expected = rows as usize * cols as usize;
        if bits.len() != expected {
            return Err(GeometryError::MaskLength {
                expected,
                got: bits.len(),
            });
        }
        Ok(Self { rows, cols, bits })
    }

    pub fn all(rows: u32, cols: u32) -> Self {
        Self {
            rows,
            cols,
            bits: vec![true; rows as usize * cols as usize],
        }
    }

    pub fn none(rows: u32, cols: u32) -> Self {
        Self {
            rows,
            cols,
            bits: vec![false; rows as usize * cols as usize],
        }
    }

    pub fn rows(&self) -> u32 {
        self.rows
    }
    pub fn cols(&self) -> u32 {
        self.cols
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn get(&self, index: usize) -> bool {
        self.bits[index]
    }

    pub fn set(&mut self, index: usize, value: bool) {
        self.bits[index] = value;
    }

    pub fn count_set(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn is_all(&self) -> bool {
        self.bits.iter().all(|&b| b)
    }
}

/// Marks every patch with positive-area overlap with any box.
pub fn boxes_to_patch_mask(boxes: &[BBox], grid: &PatchGrid) -> PatchMask {
    let mut mask = PatchMask::none(grid.rows, grid.cols);
    for row in 0..grid.rows {
        for col in 0..grid.cols {
            let rect = grid.patch_rect(row, col).expect("in range");
            if boxes.iter().any(|b| b.intersect(&rect).is_some()) {
                mask.set(grid.index(row, col), true);
            }
        }
    }
    mask
}
