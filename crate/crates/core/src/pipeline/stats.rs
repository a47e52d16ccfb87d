//! Benchmark statistics table.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::Sample;
use crate::geometry::union_area;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("statistics need at least one sample")]
pub struct EmptyBenchmark;

/// One column of the statistics table. Ratios and areas are percentages.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetStats {
    pub questions: usize,
    pub images: usize,
    pub question_len: f64,
    pub answer_len: f64,
    pub ocr_text_len: f64,
    pub ocr_boxes: f64,
    pub gt_boxes: f64,
    pub gt_box_ratio: f64,
    pub ocr_area: f64,
    pub gt_area: f64,
    pub gt_area_ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatsTable {
    pub per_dataset: BTreeMap<String, DatasetStats>,
    /// Counts are totals; every other row is the mean of the dataset columns.
    pub total: DatasetStats,
}

fn words(text: &str) -> f64 {
    text.split_whitespace().count() as f64
}

fn mean(values: impl IntoIterator<Item = f64>) -> f64 {
    let (sum, n) = values.into_iter().fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

struct Row {
    question_len: f64,
    answer_len: f64,
    ocr_text_len: f64,
    ocr_boxes: f64,
    gt_boxes: f64,
    gt_box_ratio: f64,
    ocr_area: f64,
    gt_area: f64,
    gt_area_ratio: f64,
}

fn row(s: &Sample) -> Row {
    let image_area = f64::from(s.image.width) * f64::from(s.image.height);
    let ocr_union = union_area(&s.ocr_boxes()) as f64;
    let gt_union = union_area(&s.gt_boxes()) as f64;
    let n_ocr = s.ocr.len() as f64;
    let n_gt = s.gt_indices.len() as f64;
    let ratio = |a: f64, b: f64| if b > 0.0 { 100.0 * a / b } else { 0.0 };
    Row {
        question_len: words(&s.question),
        answer_len: words(&s.answer),
        ocr_text_len: mean(s.ocr.iter().map(|o| words(&o.text))),
        ocr_boxes: n_ocr,
        gt_boxes: n_gt,
        gt_box_ratio: ratio(n_gt, n_ocr),
        ocr_area: ratio(ocr_union, image_area),
        gt_area: ratio(gt_union, image_area),
        gt_area_ratio: ratio(gt_union, ocr_union),
    }
}

fn column(samples: &[&Sample]) -> DatasetStats {
    let rows: Vec<Row> = samples.iter().map(|s| row(s)).collect();
    let m = |f: fn(&Row) -> f64| mean(rows.iter().map(f));
    DatasetStats {
        questions: samples.len(),
        images: samples.iter().map(|s| &s.image.path).collect::<BTreeSet<_>>().len(),
        question_len: m(|r| r.question_len),
        answer_len: m(|r| r.answer_len),
        ocr_text_len: m(|r| r.ocr_text_len),
        ocr_boxes: m(|r| r.ocr_boxes),
        gt_boxes: m(|r| r.gt_boxes),
        gt_box_ratio: m(|r| r.gt_box_ratio),
        ocr_area: m(|r| r.ocr_area),
        gt_area: m(|r| r.gt_area),
        gt_area_ratio: m(|r| r.gt_area_ratio),
    }
}

pub fn compute_stats(samples: &[Sample]) -> Result<StatsTable, EmptyBenchmark> {
    if samples.is_empty() {
        return Err(EmptyBenchmark);
    }
    let mut groups: BTreeMap<&str, Vec<&Sample>> = BTreeMap::new();
    for s in samples {
        groups.entry(&s.dataset).or_default().push(s);
    }
    let per_dataset: BTreeMap<String, DatasetStats> = groups.iter().map(|(d, g)| (d.to_string(), column(g))).collect();
    let cols: Vec<&DatasetStats> = per_dataset.values().collect();
    let m = |f: fn(&DatasetStats) -> f64| mean(cols.iter().map(|c| f(c)));
    let total = DatasetStats {
        questions: samples.len(),
        images: samples.iter().map(|s| &s.image.path).collect::<BTreeSet<_>>().len(),
        question_len: m(|c| c.question_len),
        answer_len: m(|c| c.answer_len),
        ocr_text_len: m(|c| c.ocr_text_len),
        ocr_boxes: m(|c| c.ocr_boxes),
        gt_boxes: m(|c| c.gt_boxes),
        gt_box_ratio: m(|c| c.gt_box_ratio),
        ocr_area: m(|c| c.ocr_area),
        gt_area: m(|c| c.gt_area),
        gt_area_ratio: m(|c| c.gt_area_ratio),
    };
    Ok(StatsTable { per_dataset, total })
}

impl StatsTable {
    /// Rows are statistics, columns are datasets followed by the total.
    pub fn render_text(&self) -> String {
        let cols: Vec<(&str, &DatasetStats)> = self
            .per_dataset
            .iter()
            .map(|(k, v)| (k.as_str(), v))
            .chain(std::iter::once(("Total", &self.total)))
            .collect();
        type Cell = fn(&DatasetStats) -> String;
        let rows: [(&str, Cell); 11] = [
            ("Total Question #", |s| s.questions.to_string()),
            ("Total Image #", |s| s.images.to_string()),
            ("Avg Question Len", |s| format!("{:.2}", s.question_len)),
            ("Avg Answer Len", |s| format!("{:.2}", s.answer_len)),
            ("Avg OCR Text Len", |s| format!("{:.2}", s.ocr_text_len)),
            ("Avg OCR Box #", |s| format!("{:.2}", s.ocr_boxes)),
            ("Avg GT Box #", |s| format!("{:.2}", s.gt_boxes)),
            ("Avg GT Box Ratio", |s| format!("{:.2}%", s.gt_box_ratio)),
            ("Avg OCR Area (%)", |s| format!("{:.2}", s.ocr_area)),
            ("Avg GT Area (%)", |s| format!("{:.2}", s.gt_area)),
            ("Avg GT Area Ratio", |s| format!("{:.2}%", s.gt_area_ratio)),
        ];
        let cells: Vec<Vec<String>> = rows
            .iter()
            .map(|(_, f)| cols.iter().map(|(_, s)| f(s)).collect())
            .collect();
        let label_w = rows.iter().map(|(l, _)| l.len()).max().unwrap_or(0);
        let widths: Vec<usize> = cols
            .iter()
            .enumerate()
            .map(|(j, (name, _))| cells.iter().map(|r| r[j].len()).chain([name.len()]).max().unwrap_or(0))
            .collect();
        let mut out = format!("{:label_w$}", "");
        for ((name, _), w) in cols.iter().zip(&widths) {
            let _ = write!(out, " | {name:>w$}");
        }
        out.push('\n');
        for ((label, _), r) in rows.iter().zip(&cells) {
            let _ = write!(out, "{label:label_w$}");
            for (c, w) in r.iter().zip(&widths) {
                let _ = write!(out, " | {c:>w$}");
            }
            out.push('\n');
        }
        out
    }
}
