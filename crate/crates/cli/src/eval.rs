//! Scoring externally produced model responses.

use std::collections::{BTreeMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Deserialize;
use trig_core::metrics::{aggregate, score_sample, EvalReport, SampleScore, Setting};
use trig_core::parsing::{parse_response, ParseOptions, ResponseFormat};
use trig_core::pipeline::{load_benchmark, Sample};

use crate::error::{CliError, CliResult, Outcome};
use crate::report::{
    digest_file, render_eval_table, table_path, write_json, write_text, Conventions, ReportDocument, RunConfig,
    ToolInfo,
};
use crate::with_threads;

#[derive(Debug, Clone)]
pub struct EvalArgs {
    pub bench: PathBuf,
    pub responses: PathBuf,
    pub setting: Setting,
    pub format: ResponseFormat,
    pub rel_scale: f64,
    pub fallback: bool,
    pub out: PathBuf,
    pub threads: usize,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ResponseRecord {
    id: String,
    response: Option<String>,
}

/// Reads `{"id", "response"}` lines; a null response is an empty reply.
pub fn read_responses(path: &Path) -> Result<BTreeMap<String, String>, CliError> {
    let file = File::open(path).map_err(|e| CliError::io(path, e))?;
    let mut out = BTreeMap::new();
    for (n, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| CliError::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: ResponseRecord = serde_json::from_str(&line)
            .map_err(|e| CliError::Schema(format!("{}: line {}: {e}", path.display(), n + 1)))?;
        if out.insert(rec.id.clone(), rec.response.unwrap_or_default()).is_some() {
            return Err(CliError::Schema(format!(
                "{}: line {}: duplicate response for `{}`",
                path.display(),
                n + 1,
                rec.id
            )));
        }
    }
    Ok(out)
}

pub fn check_setting_format(setting: Setting, format: ResponseFormat) -> Result<(), CliError> {
    if setting.scores_boxes() != format.yields_boxes() {
        let need = if setting.scores_boxes() {
            "css, abs or rel"
        } else {
            "index"
        };
        return Err(CliError::Schema(format!(
            "setting {} needs --format {need}, got {format}",
            setting.number()
        )));
    }
    Ok(())
}

fn score_one(args: &EvalArgs, sample: &Sample, response: Option<&String>) -> Result<SampleScore, CliError> {
    let Some(text) = response else {
        return Ok(SampleScore::missing(&sample.id, args.setting));
    };
    let opts = ParseOptions {
        image_w: sample.image.width,
        image_h: sample.image.height,
        rel_scale: args.rel_scale,
        fallback: args.fallback,
        max_index: sample.max_index(),
    };
    let parsed = parse_response(text, args.format, &opts);
    score_sample(args.setting, &parsed, sample).map_err(|e| CliError::Runtime(e.to_string()))
}

/// Scores every benchmark sample; samples without a response score zero.
pub fn evaluate(
    args: &EvalArgs,
    samples: &[Sample],
    responses: &BTreeMap<String, String>,
) -> Result<(EvalReport, Vec<String>), CliError> {
    let known: HashSet<&str> = samples.iter().map(|s| s.id.as_str()).collect();
    let unknown: Vec<&str> = responses
        .keys()
        .map(String::as_str)
        .filter(|id| !known.contains(id))
        .collect();
    if !unknown.is_empty() {
        return Err(CliError::IdMismatch(format!(
            "{} response id(s) not in the benchmark: {}",
            unknown.len(),
            unknown.iter().take(10).copied().collect::<Vec<_>>().join(", ")
        )));
    }
    let scores = with_threads(args.threads, || {
        samples
            .par_iter()
            .map(|s| score_one(args, s, responses.get(&s.id)))
            .collect::<Result<Vec<_>, _>>()
    })??;
    let dataset_of: BTreeMap<String, String> = samples.iter().map(|s| (s.id.clone(), s.dataset.clone())).collect();
    let report = aggregate(&scores, &dataset_of).map_err(|e| CliError::Runtime(e.to_string()))?;
    let mut missing: Vec<String> = samples
        .iter()
        .filter(|s| !responses.contains_key(&s.id))
        .map(|s| s.id.clone())
        .collect();
    missing.sort();
    Ok((report, missing))
}

pub fn cmd_eval(args: &EvalArgs) -> CliResult {
    check_setting_format(args.setting, args.format)?;
    if !(args.rel_scale.is_finite() && args.rel_scale > 0.0) {
        return Err(CliError::Schema(format!(
            "--rel-scale must be positive, got {}",
            args.rel_scale
        )));
    }
    let samples = load_benchmark(&args.bench).map_err(|e| CliError::bench(&args.bench, e))?;
    if samples.is_empty() {
        return Err(CliError::Schema(format!("{}: no samples", args.bench.display())));
    }
    let responses = read_responses(&args.responses)?;
    let (result, missing_responses) = evaluate(args, &samples, &responses)?;
    let doc = ReportDocument {
        tool: ToolInfo::default(),
        command: "eval".into(),
        config: RunConfig {
            setting: Some(args.setting.number()),
            format: Some(args.format.to_string()),
            rel_scale: Some(args.rel_scale),
            fallback: Some(args.fallback),
            paths: [
                ("bench".to_string(), args.bench.display().to_string()),
                ("responses".to_string(), args.responses.display().to_string()),
            ]
            .into(),
            ..RunConfig::default()
        },
        conventions: Conventions::new(args.fallback),
        inputs: vec![
            digest_file("bench", &args.bench)?,
            digest_file("responses", &args.responses)?,
        ],
        missing_responses,
        skipped: vec![],
        provenance: None,
        result,
    };
    write_json(&args.out, &doc)?;
    write_text(
        &table_path(&args.out),
        &render_eval_table(&doc.result, &format!("Setting {}", doc.result.setting.number())),
    )?;
    Ok(Outcome::Success)
}
