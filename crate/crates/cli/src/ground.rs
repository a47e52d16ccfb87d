//! Embedding-based grounding over stored TRIGEMB files.

use std::collections::BTreeMap;
use std::path::PathBuf;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use trig_core::engine::{ground, trigemb, SelectConfig};
use trig_core::metrics::{aggregate, EvalReport, SampleScore};
use trig_core::pipeline::{load_benchmark, Sample};

use crate::error::{CliError, CliResult, Outcome};
use crate::report::{
    digest_file, render_eval_table, table_path, write_json, write_text, Conventions, InputDigest, ReportDocument,
    RunConfig, Skipped, ToolInfo,
};
use crate::with_threads;

#[derive(Debug, Clone)]
pub struct GroundArgs {
    pub bench: PathBuf,
    pub embeddings: PathBuf,
    pub select: SelectConfig,
    pub out: PathBuf,
    pub threads: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Selection {
    pub sample_id: String,
    pub patches: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundResultDoc {
    /// `None` when every sample was skipped.
    pub scores: Option<EvalReport>,
    pub selections: Vec<Selection>,
}

enum Grounded {
    Done(Box<(SampleScore, Selection, InputDigest)>),
    Skipped(Skipped),
}

fn ground_one(args: &GroundArgs, s: &Sample) -> Grounded {
    let path = args.embeddings.join(format!("{}.{}", s.id, trigemb::EXTENSION));
    let skip = |reason: String| {
        Grounded::Skipped(Skipped {
            sample_id: s.id.clone(),
            reason,
        })
    };
    let bytes = match std::fs::read(&path) {
        Ok(b) => b,
        Err(e) => return skip(format!("{}: {e}", path.display())),
    };
    let emb = match trigemb::decode(&bytes, s.image.width, s.image.height) {
        Ok(e) => e,
        Err(e) => return skip(format!("{}: {e}", path.display())),
    };
    match ground(&emb, &args.select, Some(&s.gt_boxes())) {
        Ok(r) => Grounded::Done(Box::new((
            SampleScore::from_boxes(&s.id, &r.boxes, &s.gt_boxes(), !r.boxes.is_empty()),
            Selection {
                sample_id: s.id.clone(),
                patches: r.indices,
            },
            InputDigest {
                role: "embeddings".into(),
                path: path.display().to_string(),
                sha256: crate::report::sha256_hex(&bytes),
            },
        ))),
        Err(e) => skip(e.to_string()),
    }
}

pub fn cmd_ground(args: &GroundArgs) -> CliResult {
    args.select.validate().map_err(|e| CliError::Schema(e.to_string()))?;
    let samples = load_benchmark(&args.bench).map_err(|e| CliError::bench(&args.bench, e))?;
    if !args.embeddings.is_dir() {
        return Err(CliError::Io(format!("{}: not a directory", args.embeddings.display())));
    }
    let results = with_threads(args.threads, || {
        samples.par_iter().map(|s| ground_one(args, s)).collect::<Vec<_>>()
    })?;

    let mut scores = Vec::new();
    let mut selections = Vec::new();
    let mut inputs = vec![digest_file("bench", &args.bench)?];
    let mut skipped = Vec::new();
    let mut dataset_of = BTreeMap::new();
    for (s, r) in samples.iter().zip(results) {
        match r {
            Grounded::Done(done) => {
                let (score, sel, digest) = *done;
                dataset_of.insert(s.id.clone(), s.dataset.clone());
                scores.push(score);
                selections.push(sel);
                inputs.push(digest);
            }
            Grounded::Skipped(skip) => skipped.push(skip),
        }
    }
    selections.sort_by(|a, b| a.sample_id.cmp(&b.sample_id));
    inputs[1..].sort_by(|a, b| a.path.cmp(&b.path));
    skipped.sort_by(|a, b| a.sample_id.cmp(&b.sample_id));
    let report = if scores.is_empty() {
        None
    } else {
        Some(aggregate(&scores, &dataset_of).map_err(|e| CliError::Runtime(e.to_string()))?)
    };
    for s in &skipped {
        eprintln!("skipped {}: {}", s.sample_id, s.reason);
    }
    let n_skipped = skipped.len();
    let doc = ReportDocument {
        tool: ToolInfo::default(),
        command: "ground".into(),
        config: RunConfig {
            k1: Some(args.select.k1),
            k2: Some(args.select.k2),
            window: Some(args.select.window),
            adjacency: Some(args.select.adjacency),
            paths: [
                ("bench".to_string(), args.bench.display().to_string()),
                ("embeddings".to_string(), args.embeddings.display().to_string()),
            ]
            .into(),
            ..RunConfig::default()
        },
        conventions: Conventions::new(false),
        inputs,
        missing_responses: vec![],
        skipped,
        provenance: None,
        result: GroundResultDoc {
            scores: report,
            selections,
        },
    };
    write_json(&args.out, &doc)?;
    if let Some(r) = &doc.result.scores {
        write_text(&table_path(&args.out), &render_eval_table(r, "Embedding grounding"))?;
    }
    Ok(Outcome::from_skipped(n_skipped))
}
