//! Running the generation / rectification loop over a candidate file.

use std::path::PathBuf;
use std::time::Duration;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use trig_core::pipeline::construction::{ConstructionError, Exchange, RetryPolicy, Retrying};
use trig_core::pipeline::{
    load_records, run_construction_loop, write_benchmark, ChatClient, LoopConfig, Records, Sample, Verdict,
};

use crate::error::{CliError, CliResult, Outcome};
use crate::http::{HttpChatClient, TOKEN_ENV};
use crate::prompts::file_stem;
use crate::report::{digest_file, write_json, write_text, Conventions, ReportDocument, RunConfig, Skipped, ToolInfo};
use crate::with_threads;

#[derive(Debug, Clone)]
pub struct PipelineArgs {
    pub bench: PathBuf,
    pub endpoint: String,
    pub model: String,
    pub loop_cfg: LoopConfig,
    pub concurrency: usize,
    pub timeout: Duration,
    pub retry: RetryPolicy,
    pub image_root: Option<PathBuf>,
    pub out: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineSummary {
    pub accepted: Vec<String>,
    pub rejected: Vec<String>,
    pub failed: Vec<Skipped>,
}

#[derive(Debug, Serialize)]
struct FailedTranscript<'a> {
    sample_id: &'a str,
    error: String,
    transcript: &'a [Exchange],
}

/// Runs every sample through the loop with its own client.
pub fn run_all<C, F>(
    samples: &[Sample],
    cfg: &LoopConfig,
    threads: usize,
    make_client: F,
) -> Result<Vec<Result<Verdict, ConstructionError>>, CliError>
where
    C: ChatClient,
    F: Fn() -> C + Sync,
{
    with_threads(threads, || {
        samples
            .par_iter()
            .map(|s| run_construction_loop(&mut make_client(), s, cfg))
            .collect()
    })
}

pub fn cmd_pipeline(args: &PipelineArgs) -> CliResult {
    if args.loop_cfg.max_rounds == 0 {
        return Err(CliError::Schema("--max-rounds must be at least 1".into()));
    }
    let samples = load_records(&args.bench, Records::Candidates).map_err(|e| CliError::bench(&args.bench, e))?;
    let token = std::env::var(TOKEN_ENV).ok().filter(|t| !t.is_empty());
    if token.is_none() {
        eprintln!("warning: {TOKEN_ENV} is not set; sending requests without authorization");
    }
    let image_root = args
        .image_root
        .clone()
        .or_else(|| args.bench.parent().map(PathBuf::from))
        .unwrap_or_default();
    let client = HttpChatClient::new(&args.endpoint, &args.model, args.timeout, token, &image_root);
    let results = run_all(&samples, &args.loop_cfg, args.concurrency, || {
        Retrying::new(client.clone(), args.retry)
    })?;

    let mut summary = PipelineSummary {
        accepted: vec![],
        rejected: vec![],
        failed: vec![],
    };
    let mut accepted_samples = Vec::new();
    let transcripts = args.out.join("transcripts");
    for (s, r) in samples.iter().zip(results) {
        let path = transcripts.join(format!("{}.json", file_stem(&s.id)));
        match r {
            Ok(v) => {
                write_json(&path, &v)?;
                if v.accepted {
                    summary.accepted.push(s.id.clone());
                    accepted_samples.push(Sample {
                        gt_indices: v.final_indices.clone(),
                        ..s.clone()
                    });
                } else {
                    summary.rejected.push(s.id.clone());
                }
            }
            Err(e) => {
                let transcript: &[Exchange] = match &e {
                    ConstructionError::Endpoint { transcript, .. } => transcript,
                    _ => &[],
                };
                write_json(
                    &path,
                    &FailedTranscript {
                        sample_id: &s.id,
                        error: e.to_string(),
                        transcript,
                    },
                )?;
                eprintln!("failed {}: {e}", s.id);
                summary.failed.push(Skipped {
                    sample_id: s.id.clone(),
                    reason: e.to_string(),
                });
            }
        }
    }
    let mut buf = Vec::new();
    write_benchmark(&accepted_samples, &mut buf).map_err(|e| CliError::Runtime(e.to_string()))?;
    write_text(
        &args.out.join("accepted.jsonl"),
        &String::from_utf8(buf).expect("JSON is UTF-8"),
    )?;
    let failed = summary.failed.len();
    let doc = ReportDocument {
        tool: ToolInfo::default(),
        command: "pipeline".into(),
        config: RunConfig {
            max_rounds: Some(args.loop_cfg.max_rounds),
            endpoint: Some(args.endpoint.clone()),
            model: Some(args.model.clone()),
            concurrency: Some(args.concurrency),
            generation_image: Some(args.loop_cfg.image_for_generation),
            rectifier_image: Some(args.loop_cfg.image_for_rectification),
            timeout_secs: Some(args.timeout.as_secs_f64()),
            retries: Some(args.retry.max_retries),
            paths: [("bench".to_string(), args.bench.display().to_string())].into(),
            ..RunConfig::default()
        },
        conventions: Conventions::new(false),
        inputs: vec![digest_file("bench", &args.bench)?],
        missing_responses: vec![],
        skipped: summary.failed.clone(),
        provenance: None,
        result: summary,
    };
    write_json(&args.out.join("summary.json"), &doc)?;
    Ok(Outcome::from_skipped(failed))
}
