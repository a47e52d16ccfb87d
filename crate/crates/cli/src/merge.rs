//! Best-of-prompts merging of evaluation reports, decided per dataset.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};

use trig_core::metrics::{overall_summary, EvalReport, Summary};

use crate::error::{CliError, CliResult, Outcome};
use crate::report::{
    digest_file, render_eval_table, table_path, write_json, write_text, Conventions, MergeChoice, ReportDocument,
    RunConfig, ToolInfo,
};

pub type EvalDocument = ReportDocument<EvalReport>;

pub fn read_report(path: &PathBuf) -> Result<EvalDocument, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| CliError::Schema(format!("{}: {e}", path.display())))
}

fn sample_ids(r: &EvalReport) -> BTreeSet<(&str, &str)> {
    r.sample_scores
        .iter()
        .map(|s| (s.dataset.as_str(), s.sample_id.as_str()))
        .collect()
}

/// Index of the first maximum.
fn best_by(reports: &[&EvalReport], key: impl Fn(&Summary) -> f64, dataset: &str) -> usize {
    let mut best = 0;
    for (i, r) in reports.iter().enumerate().skip(1) {
        if key(&r.per_dataset[dataset]) > key(&reports[best].per_dataset[dataset]) {
            best = i;
        }
    }
    best
}

/// Per dataset: (grounding winner, instruction-following winner) input positions.
pub type Winners = BTreeMap<String, (usize, usize)>;

/// For each dataset, takes scores from the report with the highest mean
/// metric and the instruction-following rate from the report with the highest
/// rate. Returns the merged report and the winning input per dataset.
pub fn merge_reports(reports: &[&EvalReport]) -> Result<(EvalReport, Winners), CliError> {
    let first = reports
        .first()
        .ok_or_else(|| CliError::Schema("nothing to merge".into()))?;
    let ids = sample_ids(first);
    for (i, r) in reports.iter().enumerate().skip(1) {
        if r.setting != first.setting {
            return Err(CliError::Schema(format!(
                "input {} is setting {}, input 1 is setting {}",
                i + 1,
                r.setting.number(),
                first.setting.number()
            )));
        }
        if sample_ids(r) != ids {
            return Err(CliError::IdMismatch(format!(
                "input {} covers different samples or datasets than input 1",
                i + 1
            )));
        }
    }
    let mut per_dataset = BTreeMap::new();
    let mut choice = BTreeMap::new();
    let mut scores = Vec::new();
    for name in first.per_dataset.keys() {
        let g = best_by(reports, |s| s.metrics.headline(), name);
        let f = best_by(reports, |s| s.instruction_following_rate, name);
        let chosen = &reports[g].per_dataset[name];
        per_dataset.insert(
            name.clone(),
            Summary {
                samples: chosen.samples,
                metrics: chosen.metrics,
                instruction_following_rate: reports[f].per_dataset[name].instruction_following_rate,
            },
        );
        scores.extend(reports[g].sample_scores.iter().filter(|s| &s.dataset == name).cloned());
        choice.insert(name.clone(), (g, f));
    }
    scores.sort_by(|a, b| a.sample_id.cmp(&b.sample_id));
    let overall = overall_summary(&per_dataset);
    Ok((
        EvalReport {
            setting: first.setting,
            per_dataset,
            overall,
            sample_scores: scores,
        },
        choice,
    ))
}

pub fn cmd_report_merge(inputs: &[PathBuf], out: &Path) -> CliResult {
    let docs = inputs.iter().map(read_report).collect::<Result<Vec<_>, _>>()?;
    if let Some((i, d)) = docs
        .iter()
        .enumerate()
        .find(|(_, d)| d.command != "eval" && d.command != "report-merge")
    {
        return Err(CliError::Schema(format!(
            "{}: a `{}` report cannot be merged",
            inputs[i].display(),
            d.command
        )));
    }
    let reports: Vec<&EvalReport> = docs.iter().map(|d| &d.result).collect();
    let (result, choice) = merge_reports(&reports)?;
    let name = |i: usize| inputs[i].display().to_string();
    let provenance = choice
        .iter()
        .map(|(d, &(g, f))| {
            (
                d.clone(),
                MergeChoice {
                    grounding: name(g),
                    instruction_following: name(f),
                },
            )
        })
        .collect();
    let mut missing = BTreeSet::new();
    for (d, &(g, _)) in &choice {
        let in_dataset: BTreeSet<&str> = result
            .sample_scores
            .iter()
            .filter(|s| &s.dataset == d)
            .map(|s| s.sample_id.as_str())
            .collect();
        missing.extend(
            docs[g]
                .missing_responses
                .iter()
                .filter(|id| in_dataset.contains(id.as_str()))
                .cloned(),
        );
    }
    let doc = ReportDocument {
        tool: ToolInfo::default(),
        command: "report-merge".into(),
        config: RunConfig {
            mode: Some("best".into()),
            paths: inputs
                .iter()
                .enumerate()
                .map(|(i, p)| (format!("in{}", i + 1), p.display().to_string()))
                .collect(),
            ..RunConfig::default()
        },
        conventions: Conventions::new(docs.iter().any(|d| d.conventions.fallback_extraction)),
        inputs: inputs
            .iter()
            .map(|p| digest_file("report", p))
            .collect::<Result<_, _>>()?,
        missing_responses: missing.into_iter().collect(),
        skipped: vec![],
        provenance: Some(provenance),
        result,
    };
    write_json(out, &doc)?;
    let title = format!("Setting {} (best of {})", doc.result.setting.number(), inputs.len());
    write_text(&table_path(out), &render_eval_table(&doc.result, &title))?;
    Ok(Outcome::Success)
}
