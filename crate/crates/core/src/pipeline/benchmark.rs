//! Line-delimited benchmark records.

use std::collections::HashSet;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::BBox;

#[derive(Debug, Error)]
pub enum BenchmarkError {
    #[error("line {line}: {path}: {message}")]
    Schema { line: usize, path: String, message: String },
    #[error("line {line}: duplicate sample id `{id}`")]
    DuplicateId { line: usize, id: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl BenchmarkError {
    pub fn line(&self) -> Option<usize> {
        match self {
            BenchmarkError::Schema { line, .. } | BenchmarkError::DuplicateId { line, .. } => Some(*line),
            BenchmarkError::Io(_) => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ImageInfo {
    pub path: String,
    pub width: u32,
    pub height: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OcrBox {
    pub index: usize,
    pub bbox: BBox,
    #[serde(default)]
    pub text: String,
}

/// One benchmark question with its indexed OCR boxes and ground truth.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sample {
    pub id: String,
    pub dataset: String,
    pub image: ImageInfo,
    pub question: String,
    pub answer: String,
    pub ocr: Vec<OcrBox>,
    pub gt_indices: Vec<usize>,
    /// Annotators who accepted the record during human review.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub accepted_by: Vec<String>,
}

impl Sample {
    pub fn gt_boxes(&self) -> Vec<BBox> {
        self.gt_indices
            .iter()
            .filter_map(|&i| self.ocr.get(i).map(|o| o.bbox))
            .collect()
    }

    pub fn ocr_boxes(&self) -> Vec<BBox> {
        self.ocr.iter().map(|o| o.bbox).collect()
    }

    pub fn max_index(&self) -> usize {
        self.ocr.len().saturating_sub(1)
    }

    /// Checks record invariants, returning the offending field path.
    pub fn validate(&self) -> Result<(), (String, String)> {
        self.validate_with(Records::Benchmark)
    }

    pub fn validate_with(&self, kind: Records) -> Result<(), (String, String)> {
        let fail = |path: &str, msg: String| Err((path.to_string(), msg));
        if self.id.trim().is_empty() {
            return fail("id", "must be nonempty".into());
        }
        if self.dataset.trim().is_empty() {
            return fail("dataset", "must be nonempty".into());
        }
        if self.question.trim().is_empty() {
            return fail("question", "must be nonempty".into());
        }
        if self.image.width == 0 || self.image.height == 0 {
            return fail("image", "width and height must be positive".into());
        }
        for (pos, o) in self.ocr.iter().enumerate() {
            if o.index != pos {
                return fail(
                    &format!("ocr[{pos}].index"),
                    format!("expected {pos}, found {} (indices must run 0..N-1)", o.index),
                );
            }
            if !o.bbox.within(self.image.width, self.image.height) {
                return fail(
                    &format!("ocr[{pos}].bbox"),
                    format!(
                        "{:?} exceeds the {}x{} image",
                        o.bbox.coords(),
                        self.image.width,
                        self.image.height
                    ),
                );
            }
        }
        if self.gt_indices.is_empty() && kind == Records::Benchmark {
            return fail("gt_indices", "must be nonempty".into());
        }
        let mut seen = HashSet::new();
        for (pos, &g) in self.gt_indices.iter().enumerate() {
            if g >= self.ocr.len() {
                return fail(
                    &format!("gt_indices[{pos}]"),
                    format!("index {g} is not an OCR index (sample has {} boxes)", self.ocr.len()),
                );
            }
            if !seen.insert(g) {
                return fail(&format!("gt_indices[{pos}]"), format!("duplicate index {g}"));
            }
        }
        Ok(())
    }
}

/// What a record file holds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Records {
    /// Finished benchmark samples; ground truth is required.
    Benchmark,
    /// Construction candidates, whose ground truth may still be empty.
    Candidates,
}

/// Parses and validates one record; `line` is 1-based and used in errors.
pub fn parse_record(text: &str, line: usize) -> Result<Sample, BenchmarkError> {
    parse_record_as(text, line, Records::Benchmark)
}

fn parse_record_as(text: &str, line: usize, kind: Records) -> Result<Sample, BenchmarkError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let sample: Sample = serde_path_to_error::deserialize(de).map_err(|e| BenchmarkError::Schema {
        line,
        path: e.path().to_string(),
        message: e.inner().to_string(),
    })?;
    sample
        .validate_with(kind)
        .map_err(|(path, message)| BenchmarkError::Schema { line, path, message })?;
    Ok(sample)
}

pub fn read_benchmark<R: BufRead>(reader: R) -> Result<Vec<Sample>, BenchmarkError> {
    read_records(reader, Records::Benchmark)
}

pub fn read_records<R: BufRead>(reader: R, kind: Records) -> Result<Vec<Sample>, BenchmarkError> {
    let mut samples = Vec::new();
    let mut ids = HashSet::new();
    for (n, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let sample = parse_record_as(&line, n + 1, kind)?;
        if !ids.insert(sample.id.clone()) {
            return Err(BenchmarkError::DuplicateId {
                line: n + 1,
                id: sample.id,
            });
        }
        samples.push(sample);
    }
    Ok(samples)
}

pub fn load_benchmark(path: impl AsRef<Path>) -> Result<Vec<Sample>, BenchmarkError> {
    read_benchmark(BufReader::new(File::open(path)?))
}

pub fn load_records(path: impl AsRef<Path>, kind: Records) -> Result<Vec<Sample>, BenchmarkError> {
    read_records(BufReader::new(File::open(path)?), kind)
}

pub fn write_benchmark<W: Write>(samples: &[Sample], mut out: W) -> std::io::Result<()> {
    for s in samples {
        serde_json::to_writer(&mut out, s)?;
        out.write_all(b"\n")?;
    }
    out.flush()
}

pub fn save_benchmark(samples: &[Sample], path: impl AsRef<Path>) -> std::io::Result<()> {
    write_benchmark(samples, BufWriter::new(File::create(path)?))
}

#[cfg(test)]
pub(crate) mod fixtures {
    use super::*;

    pub fn sample(id: &str, dataset: &str, n_ocr: usize, gt: &[usize]) -> Sample {
        Sample {
            id: id.into(),
            dataset: dataset.into(),
            image: ImageInfo {
                path: format!("images/{id}.png"),
                width: 200,
                height: 100,
            },
            question: "What is the value for STEM?".into(),
            answer: "52".into(),
            ocr: (0..n_ocr)
                .map(|i| OcrBox {
                    index: i,
                    bbox: BBox::new(10 * i as u32, 0, 10 * i as u32 + 8, 10).unwrap(),
                    text: format!("text {i}"),
                })
                .collect(),
            gt_indices: gt.to_vec(),
            accepted_by: vec![],
        }
    }
}

#[cfg(test)]
mod tests {
    use super::fixtures::sample;
    use super::*;

    #[test]
    fn round_trip_preserves_fields() {
        let mut a = sample("a", "chartqa", 3, &[1, 2]);
        a.accepted_by = vec!["ann1".into(), "ann2".into()];
        let b = sample("b", "docvqa", 1, &[0]);
        let mut buf = Vec::new();
        write_benchmark(&[a.clone(), b.clone()], &mut buf).unwrap();
        let back = read_benchmark(buf.as_slice()).unwrap();
        assert_eq!(back, vec![a, b]);
    }

    #[test]
    fn record_shape_matches_schema() {
        let s = sample("a", "trins", 1, &[0]);
        let v: serde_json::Value = serde_json::to_value(&s).unwrap();
        assert_eq!(v["image"]["width"], 200);
        assert_eq!(v["ocr"][0]["bbox"], serde_json::json!([0, 0, 8, 10]));
        assert!(v.get("accepted_by").is_none());
    }

    #[test]
    fn rejects_gt_outside_ocr_with_line_and_path() {
        let good = serde_json::to_string(&sample("a", "chartqa", 2, &[0])).unwrap();
        let bad = serde_json::to_string(&sample("b", "chartqa", 2, &[0, 5])).unwrap();
        let text = format!("{good}\n\n{bad}\n");
        match read_benchmark(text.as_bytes()) {
            Err(BenchmarkError::Schema { line, path, .. }) => {
                assert_eq!(line, 3);
                assert_eq!(path, "gt_indices[1]");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn reports_type_errors_with_field_path() {
        let mut v = serde_json::to_value(sample("a", "chartqa", 2, &[0])).unwrap();
        v["ocr"][1]["bbox"] = serde_json::json!([5, 5, 1, 1]);
        let err = read_benchmark(v.to_string().as_bytes()).unwrap_err();
        match err {
            BenchmarkError::Schema { line, path, .. } => {
                assert_eq!(line, 1);
                assert_eq!(path, "ocr[1].bbox");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn rejects_other_invariant_violations() {
        let mut s = sample("a", "chartqa", 3, &[0]);
        s.ocr[2].index = 7;
        assert_eq!(s.validate().unwrap_err().0, "ocr[2].index");
        let mut s = sample("a", "chartqa", 3, &[]);
        assert_eq!(s.validate().unwrap_err().0, "gt_indices");
        s.gt_indices = vec![1];
        s.question = "  ".into();
        assert_eq!(s.validate().unwrap_err().0, "question");
        let s = sample("a", "chartqa", 3, &[1, 1]);
        assert_eq!(s.validate().unwrap_err().0, "gt_indices[1]");
    }

    #[test]
    fn rejects_duplicate_ids() {
        let a = serde_json::to_string(&sample("a", "chartqa", 2, &[0])).unwrap();
        let err = read_benchmark(format!("{a}\n{a}\n").as_bytes()).unwrap_err();
        assert!(matches!(err, BenchmarkError::DuplicateId { line: 2, .. }));
    }
}
