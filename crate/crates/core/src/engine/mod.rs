//! Embedding-based grounding over precomputed patch and token embeddings.
//!
//! Training-side pieces ([`interaction`], [`col_score`], the contrastive losses
//! and [`loss_grad`]) verify the objective; inference-side pieces
//! ([`merge_embeddings`], [`similarity`], [`two_level_select`], [`ground`])
//! turn an [`EmbeddingSet`] into a set of grid patches.

mod loss;
mod select;
pub mod trigemb;

use thiserror::Error;

use crate::geometry::{GeometryError, PatchGrid, PatchMask};

pub use loss::{
    col_score, infoce_loss, interaction, loss_grad, softplus_loss, softplus_loss_with, InteractionMatrix, LossConfig,
    LossForm, LossGrad,
};
pub use select::{
    ground, merge_embeddings, similarity, two_level_select, Adjacency, GroundResult, SelectConfig, SimilarityVector,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EngineError {
    #[error("empty mask")]
    EmptyMask,
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

/// Patch embeddings over a grid plus the text-token embeddings of one sample.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingSet {
    grid: PatchGrid,
    dim: usize,
    image: Vec<f64>,
    text: Vec<f64>,
}

impl EmbeddingSet {
    /// `image` is `rows·cols × dim` row-major over the grid; `text` is `l_text × dim`.
    pub fn new(grid: PatchGrid, dim: usize, image: Vec<f64>, text: Vec<f64>) -> Result<Self, EngineError> {
        if dim == 0 {
            return Err(EngineError::Dimension("embedding width must be positive".into()));
        }
        if image.len() != grid.len() * dim {
            return Err(EngineError::Dimension(format!(
                "image embeddings have {} values, expected {}×{}",
                image.len(),
                grid.len(),
                dim
            )));
        }
        if text.is_empty() || !text.len().is_multiple_of(dim) {
            return Err(EngineError::Dimension(format!(
                "text embeddings have {} values, not a positive multiple of {dim}",
                text.len()
            )));
        }
        if !image.iter().all(|v| v.is_finite()) {
            return Err(EngineError::NonFinite("image embeddings"));
        }
        if !text.iter().all(|v| v.is_finite()) {
            return Err(EngineError::NonFinite("text embeddings"));
        }
        Ok(Self { grid, dim, image, text })
    }

    pub fn grid(&self) -> &PatchGrid {
        &self.grid
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn patch_count(&self) -> usize {
        self.grid.len()
    }

    pub fn text_len(&self) -> usize {
        self.text.len() / self.dim
    }

    pub fn patch(&self, i: usize) -> &[f64] {
        &self.image[i * self.dim..(i + 1) * self.dim]
    }

    pub fn token(&self, k: usize) -> &[f64] {
        &self.text[k * self.dim..(k + 1) * self.dim]
    }

    pub fn image_values(&self) -> &[f64] {
        &self.image
    }

    pub fn text_values(&self) -> &[f64] {
        &self.text
    }

    /// Same embeddings with every text token multiplied by `c`.
    pub fn scale_text(&self, c: f64) -> Self {
        Self {
            text: self.text.iter().map(|v| v * c).collect(),
            ..self.clone()
        }
    }

    pub fn full_mask(&self) -> PatchMask {
        PatchMask::all(self.grid.rows(), self.grid.cols())
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
