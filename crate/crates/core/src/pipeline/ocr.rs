//! OCR ingestion: quadrilaterals to indexed axis-aligned boxes.

use serde::{Deserialize, Serialize};

use super::OcrBox;
use crate::geometry::BBox;

/// One OCR detection as a four-vertex polygon.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OcrQuad {
    pub points: [[f64; 2]; 4],
    #[serde(default)]
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Ingested {
    pub boxes: Vec<OcrBox>,
    /// Quads whose hull had zero width or height.
    pub dropped: usize,
}

/// Collapses each quad to its axis-aligned hull and numbers the survivors in
/// input order. Hull edges are widened to whole pixels (floor/ceil) and, when
/// `bounds` is given, clamped to the image.
pub fn ingest_ocr(raw: &[OcrQuad], bounds: Option<(u32, u32)>) -> Ingested {
    let mut out = Ingested::default();
    for quad in raw {
        let xs = quad.points.map(|p| p[0]);
        let ys = quad.points.map(|p| p[1]);
        if !xs.iter().chain(&ys).all(|v| v.is_finite()) {
            out.dropped += 1;
            continue;
        }
        let min = |v: [f64; 4]| v.into_iter().fold(f64::INFINITY, f64::min).floor();
        let max = |v: [f64; 4]| v.into_iter().fold(f64::NEG_INFINITY, f64::max).ceil();
        let (mut x1, mut y1, mut x2, mut y2) = (min(xs), min(ys), max(xs), max(ys));
        x1 = x1.max(0.0);
        y1 = y1.max(0.0);
        if let Some((w, h)) = bounds {
            x2 = x2.min(f64::from(w));
            y2 = y2.min(f64::from(h));
        }
        match BBox::from_signed(x1 as i64, y1 as i64, x2 as i64, y2 as i64) {
            Ok(bbox) => out.boxes.push(OcrBox {
                index: out.boxes.len(),
                bbox,
                text: quad.text.clone(),
            }),
            Err(_) => out.dropped += 1,
        }
    }
    out
}
