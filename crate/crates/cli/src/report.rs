//! Report documents shared by every command.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use trig_core::engine::Adjacency;
use trig_core::metrics::{EvalReport, Summary};

use crate::error::CliError;

pub const TOOL_NAME: &str = "trig";
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ToolInfo {
    pub name: String,
    pub version: String,
}

impl Default for ToolInfo {
    fn default() -> Self {
        Self {
            name: TOOL_NAME.into(),
            version: TOOL_VERSION.into(),
        }
    }
}

/// Every parameter that can change a result. Output paths and the thread
/// count are left out so that reruns compare byte-for-byte.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub setting: Option<u8>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub format: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub rel_scale: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub fallback: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub k1: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub k2: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub window: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub adjacency: Option<Adjacency>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub max_rounds: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub endpoint: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub model: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub concurrency: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub generation_image: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub rectifier_image: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub timeout_secs: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub retries: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub mode: Option<String>,
    #[serde(skip_serializing_if = "BTreeMap::is_empty", default)]
    pub paths: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Conventions {
    pub boxes: String,
    pub averaging: String,
    pub f1_zero_division: String,
    pub relative_rounding: String,
    pub fallback_extraction: bool,
}

impl Conventions {
    pub fn new(fallback_extraction: bool) -> Self {
        Self {
            boxes: "half-open integer pixels [x1, x2) x [y1, y2)".into(),
            averaging: "macro: mean per dataset, then unweighted mean over datasets".into(),
            f1_zero_division: "0/0 -> 0".into(),
            relative_rounding: "half away from zero, then clamped to the image".into(),
            fallback_extraction,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InputDigest {
    pub role: String,
    pub path: String,
    pub sha256: String,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .fold(String::with_capacity(64), |mut s, b| {
            let _ = write!(s, "{b:02x}");
            s
        })
}

pub fn digest_file(role: &str, path: &Path) -> Result<InputDigest, CliError> {
    let bytes = fs::read(path).map_err(|e| CliError::io(path, e))?;
    Ok(InputDigest {
        role: role.into(),
        path: path.display().to_string(),
        sha256: sha256_hex(&bytes),
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Skipped {
    pub sample_id: String,
    pub reason: String,
}

/// Where each merged family came from, per dataset.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MergeChoice {
    pub grounding: String,
    pub instruction_following: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportDocument<T> {
    pub tool: ToolInfo,
    pub command: String,
    pub config: RunConfig,
    pub conventions: Conventions,
    pub inputs: Vec<InputDigest>,
    #[serde(default)]
    pub missing_responses: Vec<String>,
    #[serde(default)]
    pub skipped: Vec<Skipped>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub provenance: Option<BTreeMap<String, MergeChoice>>,
    pub result: T,
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::Runtime(e.to_string()))?;
    text.push('\n');
    write_text(path, &text)
}

pub fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    fs::write(path, text).map_err(|e| CliError::io(path, e))
}

/// Sibling path for the aligned-text rendering of a structured report.
pub fn table_path(out: &Path) -> PathBuf {
    let txt = out.with_extension("txt");
    if txt == out {
        out.with_extension("table.txt")
    } else {
        txt
    }
}

fn pct(v: Option<f64>) -> String {
    v.map_or_else(|| "-".into(), |v| format!("{:.2}", 100.0 * v))
}

/// Metrics as rows, datasets plus the macro average as columns, in percent.
pub fn render_eval_table(report: &EvalReport, title: &str) -> String {
    let cols: Vec<(&str, &Summary)> = report
        .per_dataset
        .iter()
        .map(|(k, v)| (k.as_str(), v))
        .chain(std::iter::once(("Avg", &report.overall)))
        .collect();
    type Cell = fn(&Summary) -> Option<f64>;
    let rows: [(&str, Cell); 6] = [
        ("Pixel IoU", |s| s.metrics.pixel_iou),
        ("Instance IoU", |s| s.metrics.instance_iou),
        ("Precision", |s| s.metrics.precision),
        ("Recall", |s| s.metrics.recall),
        ("F1", |s| s.metrics.f1),
        ("Instruction following", |s| Some(s.instruction_following_rate)),
    ];
    let mut table: Vec<Vec<String>> = vec![std::iter::once(title.to_string())
        .chain(cols.iter().map(|(n, _)| n.to_string()))
        .collect()];
    for (label, get) in rows {
        if cols.iter().all(|(_, s)| get(s).is_none()) {
            continue;
        }
        table.push(
            std::iter::once(label.to_string())
                .chain(cols.iter().map(|(_, s)| pct(get(s))))
                .collect(),
        );
    }
    table.push(
        std::iter::once("Samples".to_string())
            .chain(cols.iter().map(|(_, s)| s.samples.to_string()))
            .collect(),
    );
    align(&table)
}

pub fn align(table: &[Vec<String>]) -> String {
    let ncol = table.iter().map(Vec::len).max().unwrap_or(0);
    let widths: Vec<usize> = (0..ncol)
        .map(|j| {
            table
                .iter()
                .filter_map(|r| r.get(j))
                .map(|c| c.chars().count())
                .max()
                .unwrap_or(0)
        })
        .collect();
    let mut out = String::new();
    for row in table {
        for (j, cell) in row.iter().enumerate() {
            if j == 0 {
                let _ = write!(out, "{cell:<w$}", w = widths[0]);
            } else {
                let _ = write!(out, " | {cell:>w$}", w = widths[j]);
            }
        }
        out.push('\n');
    }
    out
}
