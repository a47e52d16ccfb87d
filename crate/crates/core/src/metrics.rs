//! Per-sample grounding scores and their macro-averaged aggregation.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{region_areas, BBox};
use crate::parsing::{Grounding, ParsedResponse};
use crate::pipeline::Sample;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MetricsError {
    #[error("parse/setting mismatch: setting {setting} needs {expected}")]
    ParseSettingMismatch { setting: Setting, expected: &'static str },
    #[error("dataset `{0}` has no scored samples")]
    EmptyDataset(String),
    #[error("sample `{0}` is not assigned to a dataset")]
    UnassignedSample(String),
    #[error("cannot aggregate an empty score list")]
    NoScores,
    #[error("scores mix settings {0} and {1}")]
    MixedSettings(Setting, Setting),
    #[error("invalid setting {0} (expected 1, 2 or 3)")]
    InvalidSetting(u8),
}

/// Evaluation setting: OCR-free (1), OCR with text (2), OCR boxes without text (3).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub enum Setting {
    OcrFree,
    OcrBased,
    BoxesOnly,
}

impl Setting {
    pub const ALL: [Setting; 3] = [Setting::OcrFree, Setting::OcrBased, Setting::BoxesOnly];

    pub fn number(self) -> u8 {
        match self {
            Setting::OcrFree => 1,
            Setting::OcrBased => 2,
            Setting::BoxesOnly => 3,
        }
    }

    /// Setting 1 scores boxes; settings 2 and 3 score selected indices.
    pub fn scores_boxes(self) -> bool {
        self == Setting::OcrFree
    }
}

impl TryFrom<u8> for Setting {
    type Error = MetricsError;

    fn try_from(n: u8) -> Result<Self, Self::Error> {
        match n {
            1 => Ok(Setting::OcrFree),
            2 => Ok(Setting::OcrBased),
            3 => Ok(Setting::BoxesOnly),
            _ => Err(MetricsError::InvalidSetting(n)),
        }
    }
}

impl From<Setting> for u8 {
    fn from(s: Setting) -> u8 {
        s.number()
    }
}

impl fmt::Display for Setting {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.number())
    }
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// `|pred ∩ gt| / |pred ∪ gt|`; duplicates collapse, empty prediction scores 0.
pub fn instance_iou(pred: &[usize], gt: &[usize]) -> f64 {
    let p: BTreeSet<_> = pred.iter().collect();
    let g: BTreeSet<_> = gt.iter().collect();
    if p.is_empty() {
        return 0.0;
    }
    ratio(p.intersection(&g).count(), p.union(&g).count())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prf {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

/// Precision, recall and F1 of one selection; F1 is 0 when `P + R = 0`.
pub fn sample_prf(pred: &[usize], gt: &[usize]) -> Prf {
    let p: BTreeSet<_> = pred.iter().collect();
    let g: BTreeSet<_> = gt.iter().collect();
    let hits = p.intersection(&g).count();
    let precision = ratio(hits, p.len());
    let recall = ratio(hits, g.len());
    let f1 = if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    Prf { precision, recall, f1 }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleScore {
    pub sample_id: String,
    /// Filled in by [`aggregate`].
    #[serde(skip_serializing_if = "String::is_empty", default)]
    pub dataset: String,
    pub setting: Setting,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub pixel_iou: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub instance_iou: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub precision: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub recall: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub f1: Option<f64>,
    pub followed_instruction: bool,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub degenerate_flags: Vec<String>,
}

impl SampleScore {
    fn blank(sample_id: &str, setting: Setting) -> Self {
        Self {
            sample_id: sample_id.to_string(),
            dataset: String::new(),
            setting,
            pixel_iou: None,
            instance_iou: None,
            precision: None,
            recall: None,
            f1: None,
            followed_instruction: false,
            degenerate_flags: Vec::new(),
        }
    }

    /// Pixel-IoU score for predicted boxes.
    pub fn from_boxes(sample_id: &str, pred: &[BBox], gt: &[BBox], followed: bool) -> Self {
        let mut s = Self::blank(sample_id, Setting::OcrFree);
        let areas = region_areas(pred, gt);
        if areas.union == 0 {
            s.degenerate_flags.push("empty_union".into());
        }
        if gt.is_empty() {
            s.degenerate_flags.push("empty_ground_truth".into());
        }
        s.pixel_iou = Some(areas.iou());
        s.followed_instruction = followed;
        s
    }

    /// Instance-level scores for selected indices.
    pub fn from_indices(sample_id: &str, setting: Setting, pred: &[usize], gt: &[usize], followed: bool) -> Self {
        let mut s = Self::blank(sample_id, setting);
        if gt.is_empty() {
            s.degenerate_flags.push("empty_ground_truth".into());
        }
        let prf = sample_prf(pred, gt);
        s.instance_iou = Some(instance_iou(pred, gt));
        s.precision = Some(prf.precision);
        s.recall = Some(prf.recall);
        s.f1 = Some(prf.f1);
        s.followed_instruction = followed;
        s
    }

    /// All-zero, not-followed score for a sample with no response.
    pub fn missing(sample_id: &str, setting: Setting) -> Self {
        let mut s = if setting.scores_boxes() {
            let mut s = Self::blank(sample_id, setting);
            s.pixel_iou = Some(0.0);
            s
        } else {
            Self::from_indices(sample_id, setting, &[], &[0], false)
        };
        s.degenerate_flags.push("missing_response".into());
        s
    }

    /// Values of every populated metric.
    pub fn metric_values(&self) -> impl Iterator<Item = f64> + '_ {
        [self.pixel_iou, self.instance_iou, self.precision, self.recall, self.f1]
            .into_iter()
            .flatten()
    }
}

/// Scores one parsed response against its benchmark record.
pub fn score_sample(setting: Setting, parsed: &ParsedResponse, sample: &Sample) -> Result<SampleScore, MetricsError> {
    let followed = parsed.followed_instruction();
    match (&parsed.grounding, setting.scores_boxes()) {
        (Grounding::Boxes(boxes), true) => Ok(SampleScore::from_boxes(&sample.id, boxes, &sample.gt_boxes(), followed)),
        (Grounding::Indices(indices), false) => Ok(SampleScore::from_indices(
            &sample.id,
            setting,
            indices,
            &sample.gt_indices,
            followed,
        )),
        (_, true) => Err(MetricsError::ParseSettingMismatch {
            setting,
            expected: "boxes",
        }),
        (_, false) => Err(MetricsError::ParseSettingMismatch {
            setting,
            expected: "indices",
        }),
    }
}

/// Fraction of samples that produced at least one box or index.
pub fn instruction_following_rate(scores: &[SampleScore]) -> f64 {
    ratio(scores.iter().filter(|s| s.followed_instruction).count(), scores.len())
}

/// Mean of each metric family; absent families stay `None`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricMeans {
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub pixel_iou: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub instance_iou: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub precision: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub recall: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub f1: Option<f64>,
}

impl MetricMeans {
    fn mean_of<T>(items: &[T], get: impl Fn(&T) -> Option<f64>) -> Option<f64> {
        let vals: Vec<f64> = items.iter().filter_map(get).collect();
        if vals.is_empty() {
            None
        } else {
            // sequential sum keeps the reduction order fixed
            Some(vals.iter().sum::<f64>() / vals.len() as f64)
        }
    }

    fn over_scores(scores: &[&SampleScore]) -> Self {
        Self {
            pixel_iou: Self::mean_of(scores, |s| s.pixel_iou),
            instance_iou: Self::mean_of(scores, |s| s.instance_iou),
            precision: Self::mean_of(scores, |s| s.precision),
            recall: Self::mean_of(scores, |s| s.recall),
            f1: Self::mean_of(scores, |s| s.f1),
        }
    }

    pub fn over_summaries<'a>(items: impl IntoIterator<Item = &'a MetricMeans>) -> Self {
        let items: Vec<&MetricMeans> = items.into_iter().collect();
        Self {
            pixel_iou: Self::mean_of(&items, |m| m.pixel_iou),
            instance_iou: Self::mean_of(&items, |m| m.instance_iou),
            precision: Self::mean_of(&items, |m| m.precision),
            recall: Self::mean_of(&items, |m| m.recall),
            f1: Self::mean_of(&items, |m| m.f1),
        }
    }

    pub fn values(&self) -> impl Iterator<Item = f64> {
        [self.pixel_iou, self.instance_iou, self.precision, self.recall, self.f1]
            .into_iter()
            .flatten()
    }

    /// Mean over the populated families, the figure tables rank by.
    pub fn headline(&self) -> f64 {
        let v: Vec<f64> = self.values().collect();
        if v.is_empty() {
            0.0
        } else {
            v.iter().sum::<f64>() / v.len() as f64
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub samples: usize,
    pub metrics: MetricMeans,
    pub instruction_following_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub setting: Setting,
    pub per_dataset: BTreeMap<String, Summary>,
    /// Unweighted mean over the dataset summaries.
    pub overall: Summary,
    pub sample_scores: Vec<SampleScore>,
}

/// Macro-averages scores per dataset, then over datasets.
///
/// Every dataset named in `dataset_of` must receive at least one score.
/// Reduction runs in sample-id order, so the result does not depend on the
/// order of `scores`.
pub fn aggregate(scores: &[SampleScore], dataset_of: &BTreeMap<String, String>) -> Result<EvalReport, MetricsError> {
    let first = scores.first().ok_or(MetricsError::NoScores)?;
    let setting = first.setting;
    if let Some(other) = scores.iter().find(|s| s.setting != setting) {
        return Err(MetricsError::MixedSettings(setting, other.setting));
    }
    let mut sorted: Vec<&SampleScore> = scores.iter().collect();
    sorted.sort_by(|a, b| a.sample_id.cmp(&b.sample_id));

    let mut buckets: BTreeMap<&str, Vec<&SampleScore>> =
        dataset_of.values().map(|d| (d.as_str(), Vec::new())).collect();
    for s in &sorted {
        let ds = dataset_of
            .get(&s.sample_id)
            .ok_or_else(|| MetricsError::UnassignedSample(s.sample_id.clone()))?;
        buckets.get_mut(ds.as_str()).expect("bucket exists").push(s);
    }

    let mut per_dataset = BTreeMap::new();
    for (name, items) in buckets {
        if items.is_empty() {
            return Err(MetricsError::EmptyDataset(name.to_string()));
        }
        let followed = items.iter().filter(|s| s.followed_instruction).count();
        per_dataset.insert(
            name.to_string(),
            Summary {
                samples: items.len(),
                metrics: MetricMeans::over_scores(&items),
                instruction_following_rate: ratio(followed, items.len()),
            },
        );
    }
    let overall = overall_summary(&per_dataset);
    Ok(EvalReport {
        setting,
        per_dataset,
        overall,
        sample_scores: sorted
            .into_iter()
            .map(|s| SampleScore {
                dataset: dataset_of[&s.sample_id].clone(),
                ..s.clone()
            })
            .collect(),
    })
}

/// Unweighted mean of dataset summaries.
pub fn overall_summary(per_dataset: &BTreeMap<String, Summary>) -> Summary {
    let n = per_dataset.len();
    let rate_sum: f64 = per_dataset.values().map(|s| s.instruction_following_rate).sum();
    Summary {
        samples: per_dataset.values().map(|s| s.samples).sum(),
        metrics: MetricMeans::over_summaries(per_dataset.values().map(|s| &s.metrics)),
        instruction_following_rate: if n == 0 { 0.0 } else { rate_sum / n as f64 },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parsing::{parse_abs_list, parse_indices, ParseDiagnostics};
    use crate::pipeline::benchmark::fixtures::sample;

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() < 1e-12
    }

    #[test]
    fn instance_iou_examples() {
        assert_eq!(instance_iou(&[1, 2], &[1, 2]), 1.0);
        assert_eq!(instance_iou(&[1], &[2]), 0.0);
        assert_eq!(instance_iou(&[1, 2, 3], &[2, 3, 4]), 0.5);
        assert_eq!(instance_iou(&[], &[2]), 0.0);
        assert_eq!(instance_iou(&[2, 2, 2], &[2]), 1.0);
    }

    #[test]
    fn prf_examples() {
        let p = sample_prf(&[1, 2], &[2, 3]);
        assert_eq!((p.precision, p.recall, p.f1), (0.5, 0.5, 0.5));
        let p = sample_prf(&[], &[1]);
        assert_eq!((p.precision, p.recall, p.f1), (0.0, 0.0, 0.0));
        let p = sample_prf(&[1, 2, 3, 4], &[1, 2]);
        assert_eq!((p.precision, p.recall), (0.5, 1.0));
        assert!(close(p.f1, 2.0 / 3.0));
    }

    #[test]
    fn score_sample_settings() {
        let s = sample("a", "chartqa", 4, &[1, 2]);
        let boxes = crate::parsing::serialize_boxes(
            &s.gt_boxes(),
            crate::parsing::ResponseFormat::ListAbsolute,
            200,
            100,
            1.0,
        )
        .unwrap();
        let parsed = parse_abs_list(&boxes, 200, 100);
        let score = score_sample(Setting::OcrFree, &parsed, &s).unwrap();
        assert_eq!(score.pixel_iou, Some(1.0));

        let parsed = parse_indices("2, 1", 3);
        let score = score_sample(Setting::OcrBased, &parsed, &s).unwrap();
        assert_eq!(
            (score.instance_iou, score.precision, score.recall, score.f1),
            (Some(1.0), Some(1.0), Some(1.0), Some(1.0))
        );

        let parsed = parse_indices("no idea", 3);
        let score = score_sample(Setting::BoxesOnly, &parsed, &s).unwrap();
        assert!(!score.followed_instruction);
        assert_eq!(score.metric_values().sum::<f64>(), 0.0);
        assert_eq!(score.metric_values().count(), 4);
    }

    #[test]
    fn score_sample_rejects_mismatch() {
        let s = sample("a", "chartqa", 4, &[1]);
        let err = score_sample(Setting::OcrFree, &parse_indices("1", 3), &s).unwrap_err();
        assert_eq!(err.to_string(), "parse/setting mismatch: setting 1 needs boxes");
        let boxes = ParsedResponse {
            answer_text: String::new(),
            grounding: Grounding::Boxes(vec![]),
            diagnostics: ParseDiagnostics::default(),
        };
        assert!(score_sample(Setting::OcrBased, &boxes, &s).is_err());
    }

    #[test]
    fn following_rate_is_decoupled_from_scores() {
        let mut scores = Vec::new();
        for i in 0..100 {
            let mut s = SampleScore::missing(&format!("s{i}"), Setting::OcrFree);
            s.followed_instruction = i < 96;
            s.pixel_iou = Some(if i < 5 { 1.0 } else { 0.0 });
            scores.push(s);
        }
        assert!(close(instruction_following_rate(&scores), 0.96));
        let mean: f64 = scores.iter().filter_map(|s| s.pixel_iou).sum::<f64>() / 100.0;
        assert!(close(mean, 0.05));
        assert_eq!(instruction_following_rate(&scores[..0]), 0.0);
    }

    fn pix(id: &str, v: f64) -> SampleScore {
        let mut s = SampleScore::missing(id, Setting::OcrFree);
        s.degenerate_flags.clear();
        s.pixel_iou = Some(v);
        s.followed_instruction = true;
        s
    }

    #[test]
    fn aggregate_single_dataset() {
        let scores = [pix("a", 0.2), pix("b", 0.4)];
        let map = BTreeMap::from([("a".into(), "d".into()), ("b".into(), "d".into())]);
        let r = aggregate(&scores, &map).unwrap();
        assert!(close(r.per_dataset["d"].metrics.pixel_iou.unwrap(), 0.3));
        assert!(close(r.overall.metrics.pixel_iou.unwrap(), 0.3));
    }

    #[test]
    fn aggregate_is_unweighted_over_datasets() {
        let scores = [pix("a", 0.1), pix("b", 0.5), pix("c", 0.5), pix("d", 0.5)];
        let map: BTreeMap<String, String> = [("a", "x"), ("b", "y"), ("c", "y"), ("d", "y")]
            .into_iter()
            .map(|(a, b)| (a.into(), b.into()))
            .collect();
        let r = aggregate(&scores, &map).unwrap();
        assert!(close(r.overall.metrics.pixel_iou.unwrap(), 0.3));
        assert_eq!(r.per_dataset["y"].samples, 3);
    }

    #[test]
    fn aggregate_errors() {
        let map = BTreeMap::from([("a".into(), "x".into()), ("z".into(), "empty".into())]);
        assert_eq!(
            aggregate(&[pix("a", 0.1)], &map).unwrap_err(),
            MetricsError::EmptyDataset("empty".into())
        );
        let map = BTreeMap::from([("a".into(), "x".into())]);
        assert_eq!(
            aggregate(&[pix("q", 0.1)], &map).unwrap_err(),
            MetricsError::UnassignedSample("q".into())
        );
        assert_eq!(aggregate(&[], &map).unwrap_err(), MetricsError::NoScores);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn metric_identities(
                pred in prop::collection::vec(0usize..12, 0..10),
                gt in prop::collection::vec(0usize..12, 1..10),
            ) {
                let iou = instance_iou(&pred, &gt);
                let p = sample_prf(&pred, &gt);
                prop_assert!(iou <= p.precision.min(p.recall) + 1e-15);
                if p.precision + p.recall > 0.0 {
                    prop_assert!(p.f1 <= p.precision.max(p.recall) + 1e-15);
                    prop_assert!(p.f1 >= p.precision.min(p.recall) - 1e-15);
                }
                let hits = pred.iter().any(|i| gt.contains(i));
                prop_assert_eq!(p.f1 == 0.0, !hits);
            }

            #[test]
            fn overall_is_permutation_invariant(
                vals in prop::collection::vec((0.0f64..1.0, 0usize..3), 3..30),
                seed in any::<u64>(),
            ) {
                use rand::{seq::SliceRandom, SeedableRng};
                let scores: Vec<SampleScore> =
                    vals.iter().enumerate().map(|(i, (v, _))| pix(&format!("s{i:03}"), *v)).collect();
                let map: BTreeMap<String, String> = vals
                    .iter()
                    .enumerate()
                    .map(|(i, (_, d))| (format!("s{i:03}"), format!("d{d}")))
                    .collect();
                let Ok(a) = aggregate(&scores, &map) else { return Ok(()); };
                let mut shuffled = scores.clone();
                shuffled.shuffle(&mut rand::rngs::StdRng::seed_from_u64(seed));
                let b = aggregate(&shuffled, &map).unwrap();
                prop_assert_eq!(a, b);
            }
        }
    }
}
