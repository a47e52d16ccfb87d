//! wasm-bindgen bindings for the static demo page in `www/`.
//!
//! Rectangles cross the boundary as flat `[x1, y1, x2, y2, ...]` arrays.

use rand::rngs::SmallRng;
use rand::{Rng, SeedableRng};
use trig_core::engine::{ground, EmbeddingSet, SelectConfig};
use trig_core::engine::{merge_embeddings, similarity};
use trig_core::geometry::{region_areas, BBox, PatchGrid};
use trig_core::parsing::{parse_response, ParseOptions, ResponseFormat};
use wasm_bindgen::prelude::*;

fn err(e: impl std::fmt::Display) -> JsError {
    JsError::new(&e.to_string())
}

fn boxes(flat: &[u32]) -> Result<Vec<BBox>, JsError> {
    if !flat.len().is_multiple_of(4) {
        return Err(JsError::new("rectangle arrays need four numbers per box"));
    }
    flat.chunks_exact(4)
        .map(|c| BBox::new(c[0], c[1], c[2], c[3]).map_err(err))
        .collect()
}

fn flatten(b: &[BBox]) -> Vec<u32> {
    b.iter().flat_map(BBox::coords).collect()
}

/// `[pred, gt, intersection, union, iou]` for two rectangle sets.
#[wasm_bindgen(js_name = regionAreas)]
pub fn region_areas_js(pred: &[u32], gt: &[u32]) -> Result<Vec<f64>, JsError> {
    let a = region_areas(&boxes(pred)?, &boxes(gt)?);
    Ok(vec![
        a.pred as f64,
        a.gt as f64,
        a.intersection as f64,
        a.union as f64,
        a.iou(),
    ])
}

/// Extracts boxes from a model response in `css`, `abs` or `rel` format.
#[wasm_bindgen(js_name = parseBoxes)]
pub fn parse_boxes(text: &str, format: &str, width: u32, height: u32, rel_scale: f64) -> Result<Vec<u32>, JsError> {
    let format = match format {
        "css" => ResponseFormat::CssAbsolute,
        "abs" => ResponseFormat::ListAbsolute,
        "rel" => ResponseFormat::ListRelative,
        other => return Err(JsError::new(&format!("unknown format `{other}`"))),
    };
    let opts = ParseOptions {
        rel_scale,
        fallback: true,
        ..ParseOptions::new(width, height)
    };
    let parsed = parse_response(text, format, &opts);
    Ok(flatten(parsed.boxes().unwrap_or_default()))
}

#[wasm_bindgen]
pub struct GroundingDemo {
    heatmap: Vec<f64>,
    selected: Vec<u32>,
    boxes: Vec<u32>,
    iou: f64,
}

#[wasm_bindgen]
impl GroundingDemo {
    /// Merged similarity per patch, row-major.
    #[wasm_bindgen(getter)]
    pub fn heatmap(&self) -> Vec<f64> {
        self.heatmap.clone()
    }

    #[wasm_bindgen(getter)]
    pub fn selected(&self) -> Vec<u32> {
        self.selected.clone()
    }

    /// Pixel rectangles of the selected patches.
    #[wasm_bindgen(getter)]
    pub fn boxes(&self) -> Vec<u32> {
        self.boxes.clone()
    }

    #[wasm_bindgen(getter)]
    pub fn iou(&self) -> f64 {
        self.iou
    }
}

/// Plants a text-aligned signal in the patches under `target` (pixel
/// rectangles), adds noise everywhere, then runs two-level selection.
#[allow(clippy::too_many_arguments)]
#[wasm_bindgen(js_name = groundSynthetic)]
pub fn ground_synthetic(
    seed: u32,
    side: u32,
    image_size: u32,
    target: &[u32],
    noise: f64,
    k1: usize,
    k2: usize,
    window: usize,
) -> Result<GroundingDemo, JsError> {
    let gt = boxes(target)?;
    let grid = PatchGrid::new(side, side, image_size, image_size).map_err(err)?;
    let (dim, text_len) = (16, 4);
    let mut rng = SmallRng::seed_from_u64(u64::from(seed));
    let text: Vec<f64> = (0..dim * text_len).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let mut image = Vec::with_capacity(grid.len() * dim);
    for i in 0..grid.len() {
        let rect = grid.patch_rect_at(i).map_err(err)?;
        let covered = gt.iter().any(|g| g.intersect(&rect).is_some());
        let token = rng.gen_range(0..text_len);
        for d in 0..dim {
            let signal = if covered { text[token * dim + d] } else { 0.0 };
            image.push(signal + noise * rng.gen_range(-1.0..1.0));
        }
    }
    let e = EmbeddingSet::new(grid, dim, image, text).map_err(err)?;
    let cfg = SelectConfig {
        k1,
        k2,
        window,
        ..SelectConfig::default()
    };
    let result = ground(&e, &cfg, Some(&gt)).map_err(err)?;
    let heatmap = similarity(&merge_embeddings(&e, window).map_err(err)?).0;
    Ok(GroundingDemo {
        heatmap,
        selected: result.indices.iter().map(|&i| i as u32).collect(),
        boxes: flatten(&result.boxes),
        iou: result.pixel_iou.unwrap_or(0.0),
    })
}
