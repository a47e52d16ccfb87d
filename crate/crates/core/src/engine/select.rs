use serde::{Deserialize, Serialize};

use super::{dot, EmbeddingSet, EngineError};
use crate::geometry::{pixel_iou, BBox, PatchGrid};

/// Which patches a pool candidate must touch to be admitted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Adjacency {
    /// Any patch selected so far, seeds or admitted candidates.
    #[default]
    Growing,
    /// Only the seed patches.
    SeedOnly,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SelectConfig {
    pub k1: usize,
    pub k2: usize,
    pub window: usize,
    #[serde(default)]
    pub adjacency: Adjacency,
}

impl Default for SelectConfig {
    fn default() -> Self {
        Self {
            k1: 5,
            k2: 30,
            window: 3,
            adjacency: Adjacency::Growing,
        }
    }
}

impl SelectConfig {
    pub fn validate(&self) -> Result<(), EngineError> {
        if self.k1 == 0 {
            return Err(EngineError::Config("k1 must be at least 1".into()));
        }
        if self.k1 > self.k2 {
            return Err(EngineError::Config(format!(
                "k1 ({}) must not exceed k2 ({})",
                self.k1, self.k2
            )));
        }
        if self.window.is_multiple_of(2) {
            return Err(EngineError::Config(format!(
                "merge window must be odd, got {}",
                self.window
            )));
        }
        Ok(())
    }
}

/// Replaces each patch embedding by the mean over its in-bounds `w × w` window.
///
/// Windows are truncated at the grid border, so border patches average fewer
/// neighbours. Text embeddings are untouched.
pub fn merge_embeddings(e: &EmbeddingSet, window: usize) -> Result<EmbeddingSet, EngineError> {
    if window.is_multiple_of(2) {
        return Err(EngineError::Config(format!("merge window must be odd, got {window}")));
    }
    if window == 1 {
        return Ok(e.clone());
    }
    let grid = e.grid();
    let (rows, cols) = (grid.rows() as usize, grid.cols() as usize);
    let half = window / 2;
    let dim = e.dim();
    let mut merged = vec![0.0; e.image_values().len()];
    for r in 0..rows {
        let (r0, r1) = (r.saturating_sub(half), (r + half).min(rows - 1));
        for c in 0..cols {
            let (c0, c1) = (c.saturating_sub(half), (c + half).min(cols - 1));
            let out = &mut merged[(r * cols + c) * dim..(r * cols + c + 1) * dim];
            for nr in r0..=r1 {
                for nc in c0..=c1 {
                    for (o, v) in out.iter_mut().zip(e.patch(nr * cols + nc)) {
                        *o += v;
                    }
                }
            }
            let n = ((r1 - r0 + 1) * (c1 - c0 + 1)) as f64;
            out.iter_mut().for_each(|o| *o /= n);
        }
    }
    EmbeddingSet::new(*grid, dim, merged, e.text_values().to_vec())
}

/// Per-patch mean dot product against the text tokens.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimilarityVector(pub Vec<f64>);

impl SimilarityVector {
    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Patch indices by descending similarity, lowest index first on ties.
    pub fn ranking(&self) -> Vec<usize> {
        let mut order: Vec<usize> = (0..self.0.len()).collect();
        order.sort_by(|&a, &b| self.0[b].total_cmp(&self.0[a]).then(a.cmp(&b)));
        order
    }
}

pub fn similarity(e: &EmbeddingSet) -> SimilarityVector {
    let n_text = e.text_len() as f64;
    SimilarityVector(
        (0..e.patch_count())
            .map(|i| {
                let p = e.patch(i);
                (0..e.text_len()).map(|k| dot(p, e.token(k))).sum::<f64>() / n_text
            })
            .collect(),
    )
}

fn touches(grid: &PatchGrid, a: usize, b: usize) -> bool {
    let (ra, ca) = grid.position(a);
    let (rb, cb) = grid.position(b);
    a != b && ra.abs_diff(rb) <= 1 && ca.abs_diff(cb) <= 1
}

/// Seeds with the `k1` most similar patches, then scans the rest of the top-`k2`
/// pool in descending order, admitting each candidate that is 8-adjacent to the
/// current selection. Returns indices in ascending order.
pub fn two_level_select(s: &SimilarityVector, grid: &PatchGrid, cfg: &SelectConfig) -> Result<Vec<usize>, EngineError> {
    cfg.validate()?;
    if s.len() != grid.len() {
        return Err(EngineError::Dimension(format!(
            "similarity vector has {} entries for {} patches",
            s.len(),
            grid.len()
        )));
    }
    if cfg.k1 > s.len() {
        return Err(EngineError::Config(format!(
            "k1 ({}) exceeds the {} patches",
            cfg.k1,
            s.len()
        )));
    }
    let order = s.ranking();
    let pool_end = cfg.k2.min(order.len());
    let seeds = &order[..cfg.k1];
    let mut in_selection = vec![false; grid.len()];
    let mut selected: Vec<usize> = seeds.to_vec();
    for &i in seeds {
        in_selection[i] = true;
    }
    for &cand in &order[cfg.k1..pool_end] {
        let anchors: &[usize] = match cfg.adjacency {
            Adjacency::Growing => &selected,
            Adjacency::SeedOnly => seeds,
        };
        if anchors.iter().any(|&a| touches(grid, a, cand)) && !in_selection[cand] {
            in_selection[cand] = true;
            selected.push(cand);
        }
    }
    selected.sort_unstable();
    Ok(selected)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundResult {
    pub indices: Vec<usize>,
    pub boxes: Vec<BBox>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pixel_iou: Option<f64>,
}

/// Merge, score, select and map the selected patches back to pixels.
pub fn ground(e: &EmbeddingSet, cfg: &SelectConfig, gt_boxes: Option<&[BBox]>) -> Result<GroundResult, EngineError> {
    cfg.validate()?;
    let merged = merge_embeddings(e, cfg.window)?;
    let sim = similarity(&merged);
    let indices = two_level_select(&sim, e.grid(), cfg)?;
    let boxes = indices
        .iter()
        .map(|&i| e.grid().patch_rect_at(i))
        .collect::<Result<Vec<_>, _>>()?;
    let pixel_iou = gt_boxes.map(|gt| pixel_iou(&boxes, gt));
    Ok(GroundResult {
        indices,
        boxes,
        pixel_iou,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(rows: u32, cols: u32) -> PatchGrid {
        PatchGrid::new(rows, cols, cols * 2, rows * 2).unwrap()
    }

    fn scalar_set(rows: u32, cols: u32, vals: Vec<f64>) -> EmbeddingSet {
        EmbeddingSet::new(grid(rows, cols), 1, vals, vec![1.0]).unwrap()
    }

    #[test]
    fn merge_identity_and_constant() {
        let e = scalar_set(2, 3, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        assert_eq!(merge_embeddings(&e, 1).unwrap(), e);
        let c = scalar_set(3, 3, vec![2.5; 9]);
        assert_eq!(merge_embeddings(&c, 3).unwrap(), c);
        assert!(merge_embeddings(&e, 2).is_err());
    }

    #[test]
    fn merge_center_spike() {
        let mut vals = vec![0.0; 9];
        vals[4] = 9.0;
        let m = merge_embeddings(&scalar_set(3, 3, vals), 3).unwrap();
        // corners average 4 cells, edges 6, centre 9
        assert_eq!(m.image_values(), &[2.25, 1.5, 2.25, 1.5, 1.0, 1.5, 2.25, 1.5, 2.25]);
    }

    #[test]
    fn similarity_examples() {
        let g = grid(1, 1);
        let e = EmbeddingSet::new(g, 2, vec![3.0, 4.0], vec![3.0, 4.0]).unwrap();
        assert_eq!(similarity(&e).values(), &[25.0]);

        let g = grid(1, 2);
        let e = EmbeddingSet::new(g, 2, vec![1.0, 0.0, 0.0, 1.0], vec![1.0, 1.0, 1.0, -1.0]).unwrap();
        assert_eq!(similarity(&e).values(), &[1.0, 0.0]);
        let swapped = EmbeddingSet::new(g, 2, vec![1.0, 0.0, 0.0, 1.0], vec![1.0, -1.0, 1.0, 1.0]).unwrap();
        assert_eq!(similarity(&swapped), similarity(&e));
    }

    #[test]
    fn select_with_empty_pool_is_top_k1() {
        let g = grid(4, 4);
        let s = SimilarityVector((0..16).map(|i| f64::from(i % 5)).collect());
        let cfg = SelectConfig {
            k1: 4,
            k2: 4,
            ..Default::default()
        };
        // 4 at 4, 9, 14, then 3 at 3, 8, 13 -> lowest index wins the tie
        assert_eq!(two_level_select(&s, &g, &cfg).unwrap(), vec![3, 4, 9, 14]);
    }

    #[test]
    fn select_admits_neighbours_only() {
        // 6×6 grid; seeds fill the 2×3 block at rows 0-1, cols 0-2 (minus one cell)
        let g = grid(6, 6);
        let mut s = vec![0.0; 36];
        for (rank, idx) in [0usize, 1, 2, 6, 7].into_iter().enumerate() {
            s[idx] = 100.0 - rank as f64;
        }
        s[9] = 50.0; // 6th: row 1, col 3, touches seed 2
        s[35] = 49.0; // 7th: far corner
        s[15] = 48.0; // 8th: row 2, col 3, touches 9 only after 9 is admitted
        let cfg = SelectConfig {
            k1: 5,
            k2: 8,
            ..Default::default()
        };
        assert_eq!(
            two_level_select(&SimilarityVector(s.clone()), &g, &cfg).unwrap(),
            vec![0, 1, 2, 6, 7, 9, 15]
        );
        let seed_only = SelectConfig {
            adjacency: Adjacency::SeedOnly,
            ..cfg
        };
        assert_eq!(
            two_level_select(&SimilarityVector(s), &g, &seed_only).unwrap(),
            vec![0, 1, 2, 6, 7, 9]
        );
    }

    #[test]
    fn select_config_validation() {
        let g = grid(2, 2);
        let s = SimilarityVector(vec![0.0; 4]);
        let bad = SelectConfig {
            k1: 6,
            k2: 5,
            ..Default::default()
        };
        assert!(two_level_select(&s, &g, &bad).is_err());
        let too_many = SelectConfig {
            k1: 5,
            k2: 5,
            ..Default::default()
        };
        assert!(two_level_select(&s, &g, &too_many).is_err());
        let even = SelectConfig {
            window: 4,
            ..Default::default()
        };
        assert!(even.validate().is_err());
    }

    #[test]
    fn ground_returns_dominant_patch() {
        let g = PatchGrid::new(4, 4, 64, 64).unwrap();
        let mut image = vec![0.0; 16];
        image[5] = 10.0;
        let e = EmbeddingSet::new(g, 1, image, vec![1.0]).unwrap();
        let cfg = SelectConfig {
            k1: 1,
            k2: 1,
            window: 1,
            ..Default::default()
        };
        let rect = g.patch_rect_at(5).unwrap();
        let r = ground(&e, &cfg, Some(&[rect])).unwrap();
        assert_eq!(r.indices, vec![5]);
        assert_eq!(r.boxes, vec![rect]);
        assert_eq!(r.pixel_iou, Some(1.0));
    }
}
