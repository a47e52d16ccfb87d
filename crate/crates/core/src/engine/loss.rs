use serde::{Deserialize, Serialize};

use super::{dot, EmbeddingSet, EngineError};
use crate::geometry::PatchMask;

/// Text × patch dot products with a patch mask.
#[derive(Debug, Clone, PartialEq)]
pub struct InteractionMatrix {
    rows: usize,
    cols: usize,
    values: Vec<f64>,
    mask: PatchMask,
}

impl InteractionMatrix {
    pub fn new(rows: usize, values: Vec<f64>, mask: PatchMask) -> Result<Self, EngineError> {
        let cols = mask.len();
        if rows == 0 || cols == 0 || values.len() != rows * cols {
            return Err(EngineError::Dimension(format!(
                "{} values do not form a {rows}×{cols} matrix",
                values.len()
            )));
        }
        if !values.iter().all(|v| v.is_finite()) {
            return Err(EngineError::NonFinite("interaction matrix"));
        }
        Ok(Self {
            rows,
            cols,
            values,
            mask,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.cols + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.cols..(i + 1) * self.cols]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn mask(&self) -> &PatchMask {
        &self.mask
    }

    pub fn with_mask(mut self, mask: PatchMask) -> Result<Self, EngineError> {
        if mask.len() != self.cols {
            return Err(EngineError::Dimension(format!(
                "mask has {} bits for {} patches",
                mask.len(),
                self.cols
            )));
        }
        self.mask = mask;
        Ok(self)
    }

    /// Copy with one entry replaced; used by finite-difference checks.
    pub fn with_value(&self, i: usize, j: usize, v: f64) -> Self {
        let mut out = self.clone();
        out.values[i * self.cols + j] = v;
        out
    }

    /// Column of each row's maximum over masked patches, lowest index on ties.
    fn argmax_rows(&self, masked: bool) -> Result<Vec<usize>, EngineError> {
        (0..self.rows)
            .map(|i| {
                let row = self.row(i);
                let mut best: Option<usize> = None;
                for (j, &v) in row.iter().enumerate() {
                    if masked && !self.mask.get(j) {
                        continue;
                    }
                    if best.is_none_or(|b| v > row[b]) {
                        best = Some(j);
                    }
                }
                best.ok_or(EngineError::EmptyMask)
            })
            .collect()
    }

    fn score(&self, masked: bool) -> Result<f64, EngineError> {
        let arg = self.argmax_rows(masked)?;
        Ok(arg.iter().enumerate().map(|(i, &j)| self.get(i, j)).sum())
    }
}

/// `X[i][j] = text_i · patch_j`, with an all-ones mask.
pub fn interaction(e: &EmbeddingSet) -> InteractionMatrix {
    let n_text = e.text_len();
    let n_patch = e.patch_count();
    let mut values = Vec::with_capacity(n_text * n_patch);
    for i in 0..n_text {
        let t = e.token(i);
        values.extend((0..n_patch).map(|j| dot(t, e.patch(j))));
    }
    InteractionMatrix {
        rows: n_text,
        cols: n_patch,
        values,
        mask: e.full_mask(),
    }
}

/// Masked col-score: sum over text rows of the row maximum on masked patches.
pub fn col_score(m: &InteractionMatrix) -> Result<f64, EngineError> {
    m.score(true)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossConfig {
    pub tau: f64,
}

impl Default for LossConfig {
    fn default() -> Self {
        Self { tau: 1.0 }
    }
}

impl LossConfig {
    pub fn new(tau: f64) -> Result<Self, EngineError> {
        if !(tau.is_finite() && tau > 0.0) {
            return Err(EngineError::Config(format!("temperature must be positive, got {tau}")));
        }
        Ok(Self { tau })
    }
}

/// Positive-pair score (own mask) and negative-pair score (unmasked).
fn pair_scores(pos: &InteractionMatrix, neg: &InteractionMatrix) -> Result<(f64, f64), EngineError> {
    Ok((col_score(pos)?, neg.score(false)?))
}

/// Contrastive loss for one positive and one negative pair, in log-sum-exp form.
///
/// The positive pair is scored under its own mask, the negative pair over all
/// patches.
pub fn infoce_loss(pos: &InteractionMatrix, neg: &InteractionMatrix, cfg: &LossConfig) -> Result<f64, EngineError> {
    let (s_pos, s_neg) = pair_scores(pos, neg)?;
    let a = s_pos / cfg.tau;
    let b = s_neg / cfg.tau;
    let m = a.max(b);
    // −log(e^a / (e^a + e^b)) = (m − a) + log(e^(a−m) + e^(b−m))
    let loss = (m - a) + ((a - m).exp() + (b - m).exp()).ln();
    if loss.is_finite() {
        Ok(loss)
    } else {
        Err(EngineError::NonFinite("loss"))
    }
}

fn softplus(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Which mask placement the softplus objective uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossForm {
    /// `softplus(s(X⁻, 1) − s(X⁺, M))`, the single-negative contrastive loss.
    #[default]
    Contrastive,
    /// `softplus(s(X⁻, M)) − s(X⁺, 1)`, the literal alternative mask placement,
    /// kept for side-by-side comparison. `M` is taken from the positive matrix.
    SwappedMasks,
}

/// `softplus(s⁻ − s⁺)` with unit temperature.
pub fn softplus_loss(pos: &InteractionMatrix, neg: &InteractionMatrix) -> Result<f64, EngineError> {
    softplus_loss_with(pos, neg, LossForm::Contrastive)
}

pub fn softplus_loss_with(
    pos: &InteractionMatrix,
    neg: &InteractionMatrix,
    form: LossForm,
) -> Result<f64, EngineError> {
    match form {
        LossForm::Contrastive => {
            let (s_pos, s_neg) = pair_scores(pos, neg)?;
            Ok(softplus(s_neg - s_pos))
        }
        LossForm::SwappedMasks => {
            let neg = neg.clone().with_mask(pos.mask().clone())?;
            Ok(softplus(col_score(&neg)?) - pos.score(false)?)
        }
    }
}

/// Gradients of the contrastive loss with respect to both interaction matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct LossGrad {
    pub d_pos: Vec<f64>,
    pub d_neg: Vec<f64>,
}

/// Analytic (sub)gradient of [`infoce_loss`].
///
/// Only each row's arg-max entry carries gradient: `−σ/τ` in the positive
/// matrix (masked arg-max) and `σ/τ` in the negative one (unmasked arg-max),
/// with `σ = sigmoid((s⁻ − s⁺)/τ)`. Ties resolve to the lowest index.
pub fn loss_grad(pos: &InteractionMatrix, neg: &InteractionMatrix, cfg: &LossConfig) -> Result<LossGrad, EngineError> {
    let (s_pos, s_neg) = pair_scores(pos, neg)?;
    let weight = sigmoid((s_neg - s_pos) / cfg.tau) / cfg.tau;
    let mut d_pos = vec![0.0; pos.values.len()];
    for (i, j) in pos.argmax_rows(true)?.into_iter().enumerate() {
        d_pos[i * pos.cols + j] = -weight;
    }
    let mut d_neg = vec![0.0; neg.values.len()];
    for (i, j) in neg.argmax_rows(false)?.into_iter().enumerate() {
        d_neg[i * neg.cols + j] = weight;
    }
    Ok(LossGrad { d_pos, d_neg })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::PatchGrid;
    use rand::{Rng, SeedableRng};

    fn matrix(rows: usize, vals: &[f64], mask: &[bool]) -> InteractionMatrix {
        let m = PatchMask::from_bits(1, mask.len() as u32, mask.to_vec()).unwrap();
        InteractionMatrix::new(rows, vals.to_vec(), m).unwrap()
    }

    fn random_matrix(rng: &mut impl Rng, rows: usize, cols: usize, masked: bool) -> InteractionMatrix {
        let vals: Vec<f64> = (0..rows * cols).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let mut bits: Vec<bool> = (0..cols).map(|_| !masked || rng.gen_bool(0.5)).collect();
        bits[rng.gen_range(0..cols)] = true;
        matrix(rows, &vals, &bits)
    }

    #[test]
    fn interaction_examples() {
        let grid = PatchGrid::new(1, 1, 1, 1).unwrap();
        let e = EmbeddingSet::new(grid, 2, vec![1.0, 0.0], vec![1.0, 0.0]).unwrap();
        assert_eq!(interaction(&e).values(), &[1.0]);

        let e = EmbeddingSet::new(grid, 2, vec![1.0, 0.0], vec![0.0, 0.0]).unwrap();
        assert_eq!(interaction(&e).values(), &[0.0]);

        let grid = PatchGrid::new(1, 2, 2, 1).unwrap();
        let e = EmbeddingSet::new(grid, 2, vec![1.0, 1.0, 2.0, 0.0], vec![1.0, 0.0, 0.0, 1.0]).unwrap();
        let x = interaction(&e);
        // [[1·1+0·1, 1·2+0·0], [0·1+1·1, 0·2+1·0]]
        assert_eq!(x.values(), &[1.0, 2.0, 1.0, 0.0]);
        assert_eq!((x.rows(), x.cols()), (2, 2));
    }

    #[test]
    fn col_score_examples() {
        let x = matrix(2, &[1.0, 2.0, 3.0, 4.0], &[true, true]);
        assert_eq!(col_score(&x).unwrap(), 6.0);
        let x = matrix(2, &[1.0, 2.0, 3.0, 4.0], &[true, false]);
        assert_eq!(col_score(&x).unwrap(), 4.0);
        let x = matrix(2, &[1.0, 2.0, 3.0, 4.0], &[false, false]);
        assert_eq!(col_score(&x), Err(EngineError::EmptyMask));
    }

    #[test]
    fn loss_examples() {
        let x = matrix(1, &[0.5, 0.5], &[true, true]);
        let cfg = LossConfig::default();
        assert!((infoce_loss(&x, &x, &cfg).unwrap() - std::f64::consts::LN_2).abs() < 1e-15);
        assert!((softplus_loss(&x, &x).unwrap() - std::f64::consts::LN_2).abs() < 1e-15);

        let pos = matrix(1, &[20.0, 0.0], &[true, false]);
        let neg = matrix(1, &[0.0, 0.0], &[true, true]);
        let expected = (-20f64).exp().ln_1p();
        assert!((infoce_loss(&pos, &neg, &cfg).unwrap() - 2.061_153_6e-9).abs() < 1e-15);
        assert!((softplus_loss(&pos, &neg).unwrap() - expected).abs() < 1e-20);
    }

    #[test]
    fn loss_is_monotone_in_the_scores() {
        let neg = matrix(1, &[1.0], &[true]);
        let cfg = LossConfig::new(0.5).unwrap();
        let mut prev = f64::INFINITY;
        for k in -10..10 {
            let pos = matrix(1, &[f64::from(k)], &[true]);
            let l = infoce_loss(&pos, &neg, &cfg).unwrap();
            assert!(l > 0.0 && l < prev);
            prev = l;
        }
    }

    #[test]
    fn swapped_masks_form() {
        let pos = matrix(1, &[3.0, 1.0], &[false, true]);
        let neg = matrix(1, &[2.0, 5.0], &[true, true]);
        let got = softplus_loss_with(&pos, &neg, LossForm::SwappedMasks).unwrap();
        // softplus(s(X⁻, M) = 5) − s(X⁺, 1) = 3
        assert!((got - (softplus(5.0) - 3.0)).abs() < 1e-15);
    }

    #[test]
    fn temperature_validation() {
        assert!(LossConfig::new(0.0).is_err());
        assert!(LossConfig::new(f64::NAN).is_err());
    }

    #[test]
    fn gradient_support_and_saturation() {
        let mut rng = rand::rngs::StdRng::seed_from_u64(7);
        let pos = random_matrix(&mut rng, 4, 9, true);
        let neg = random_matrix(&mut rng, 4, 9, false);
        let g = loss_grad(&pos, &neg, &LossConfig::default()).unwrap();
        for i in 0..4 {
            assert_eq!(g.d_pos[i * 9..(i + 1) * 9].iter().filter(|v| **v != 0.0).count(), 1);
            assert_eq!(g.d_neg[i * 9..(i + 1) * 9].iter().filter(|v| **v != 0.0).count(), 1);
        }
        let pos = matrix(1, &[60.0, 0.0], &[true, true]);
        let neg = matrix(1, &[0.0, 0.0], &[true, true]);
        let g = loss_grad(&pos, &neg, &LossConfig::default()).unwrap();
        assert!(g.d_pos.iter().chain(&g.d_neg).all(|v| v.abs() < 1e-20));
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = rand::rngs::StdRng::seed_from_u64(11);
        let cfg = LossConfig::new(0.7).unwrap();
        let eps = 1e-4;
        for _ in 0..20 {
            let pos = random_matrix(&mut rng, 4, 9, true);
            let neg = random_matrix(&mut rng, 4, 9, false);
            let g = loss_grad(&pos, &neg, &cfg).unwrap();
            for i in 0..4 {
                for j in 0..9 {
                    let x = pos.get(i, j);
                    let fd = (infoce_loss(&pos.with_value(i, j, x + eps), &neg, &cfg).unwrap()
                        - infoce_loss(&pos.with_value(i, j, x - eps), &neg, &cfg).unwrap())
                        / (2.0 * eps);
                    assert!((fd - g.d_pos[i * 9 + j]).abs() <= 1e-3 * fd.abs().max(1e-6) + 1e-9);
                }
            }
        }
    }
}
