//! Command implementations behind the `trig` binary.

pub mod error;
pub mod eval;
pub mod ground;
pub mod http;
pub mod merge;
pub mod pipeline;
pub mod prompts;
pub mod report;
pub mod stats;

use std::path::PathBuf;
use std::time::Duration;

use clap::{Parser, Subcommand, ValueEnum};
use trig_core::engine::{Adjacency, SelectConfig};
use trig_core::metrics::Setting;
use trig_core::parsing::ResponseFormat;
use trig_core::pipeline::construction::{RetryPolicy, DEFAULT_MAX_ROUNDS};
use trig_core::pipeline::LoopConfig;

use error::{CliError, CliResult};

/// Runs `f` on a dedicated pool; `threads == 0` means one per core.
pub fn with_threads<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> Result<T, CliError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| CliError::Runtime(format!("thread pool: {e}")))?;
    Ok(pool.install(f))
}

#[derive(Debug, Parser)]
#[command(
    name = "trig",
    version,
    about = "Grounding evaluation and construction tools for document QA"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

fn parse_setting(s: &str) -> Result<Setting, String> {
    match s {
        "1" => Ok(Setting::OcrFree),
        "2" => Ok(Setting::OcrBased),
        "3" => Ok(Setting::BoxesOnly),
        _ => Err(format!("expected 1, 2 or 3, got `{s}`")),
    }
}

fn parse_format(s: &str) -> Result<ResponseFormat, String> {
    s.parse().map_err(|e| format!("{e}"))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum AdjacencyArg {
    Growing,
    SeedOnly,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MergeMode {
    Best,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Score model responses against a benchmark.
    Eval {
        #[arg(long)]
        bench: PathBuf,
        /// Line-delimited {"id", "response"} records.
        #[arg(long)]
        responses: PathBuf,
        #[arg(long, value_parser = parse_setting)]
        setting: Setting,
        /// css, abs, rel or index.
        #[arg(long, value_parser = parse_format)]
        format: ResponseFormat,
        #[arg(long, default_value_t = 1.0)]
        rel_scale: f64,
        /// Recover bracketed coordinates when the declared format yields nothing.
        #[arg(long)]
        fallback: bool,
        #[arg(long)]
        out: PathBuf,
        /// Worker threads (0 = one per core).
        #[arg(long, default_value_t = 0)]
        threads: usize,
    },
    /// Select patches from stored embeddings and score them.
    Ground {
        /// Directory of <sample id>.trigemb files.
        #[arg(long)]
        embeddings: PathBuf,
        #[arg(long)]
        bench: PathBuf,
        #[arg(long, default_value_t = 5)]
        k1: usize,
        #[arg(long, default_value_t = 30)]
        k2: usize,
        #[arg(long, default_value_t = 3)]
        window: usize,
        #[arg(long, value_enum, default_value = "growing")]
        adjacency: AdjacencyArg,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        threads: usize,
    },
    /// Write one evaluation prompt per sample.
    Prompts {
        #[arg(long)]
        bench: PathBuf,
        #[arg(long, value_parser = parse_setting)]
        setting: Setting,
        #[arg(long, value_parser = parse_format)]
        format: ResponseFormat,
        #[arg(long, default_value_t = 1.0)]
        rel_scale: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Write one indexed SVG overlay per sample.
    Overlay {
        #[arg(long)]
        bench: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the generation / rectification loop against a chat endpoint.
    Pipeline {
        #[arg(long)]
        bench: PathBuf,
        /// API base URL, e.g. http://localhost:8000/v1
        #[arg(long)]
        endpoint: String,
        #[arg(long, default_value = "gpt-4o")]
        model: String,
        #[arg(long, default_value_t = DEFAULT_MAX_ROUNDS)]
        max_rounds: usize,
        /// Samples processed in parallel.
        #[arg(long, default_value_t = 4)]
        concurrency: usize,
        #[arg(long, default_value_t = 120.0)]
        timeout_secs: f64,
        #[arg(long, default_value_t = 3)]
        retries: u32,
        #[arg(long, default_value_t = 500)]
        backoff_ms: u64,
        /// Do not attach the page image to generation requests.
        #[arg(long)]
        no_generation_image: bool,
        /// Attach the page image to rectification requests too.
        #[arg(long)]
        rectifier_image: bool,
        /// Directory image paths are relative to (default: the bench file's).
        #[arg(long)]
        image_root: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Benchmark statistics table.
    Stats {
        #[arg(long)]
        bench: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Merge evaluation reports, keeping the best input per dataset.
    ReportMerge {
        #[arg(long = "in", required = true, num_args = 1..)]
        inputs: Vec<PathBuf>,
        #[arg(long, value_enum, default_value = "best")]
        mode: MergeMode,
        #[arg(long)]
        out: PathBuf,
    },
}

pub fn run(cli: Cli) -> CliResult {
    match cli.command {
        Command::Eval {
            bench,
            responses,
            setting,
            format,
            rel_scale,
            fallback,
            out,
            threads,
        } => eval::cmd_eval(&eval::EvalArgs {
            bench,
            responses,
            setting,
            format,
            rel_scale,
            fallback,
            out,
            threads,
        }),
        Command::Ground {
            embeddings,
            bench,
            k1,
            k2,
            window,
            adjacency,
            out,
            threads,
        } => ground::cmd_ground(&ground::GroundArgs {
            bench,
            embeddings,
            select: SelectConfig {
                k1,
                k2,
                window,
                adjacency: match adjacency {
                    AdjacencyArg::Growing => Adjacency::Growing,
                    AdjacencyArg::SeedOnly => Adjacency::SeedOnly,
                },
            },
            out,
            threads,
        }),
        Command::Prompts {
            bench,
            setting,
            format,
            rel_scale,
            out,
        } => prompts::cmd_prompts(&bench, setting, format, rel_scale, &out),
        Command::Overlay { bench, out } => prompts::cmd_overlay(&bench, &out),
        Command::Pipeline {
            bench,
            endpoint,
            model,
            max_rounds,
            concurrency,
            timeout_secs,
            retries,
            backoff_ms,
            no_generation_image,
            rectifier_image,
            image_root,
            out,
        } => {
            if !(timeout_secs.is_finite() && timeout_secs > 0.0) {
                return Err(CliError::Schema(format!(
                    "--timeout-secs must be positive, got {timeout_secs}"
                )));
            }
            pipeline::cmd_pipeline(&pipeline::PipelineArgs {
                bench,
                endpoint,
                model,
                loop_cfg: LoopConfig {
                    max_rounds,
                    image_for_generation: !no_generation_image,
                    image_for_rectification: rectifier_image,
                },
                concurrency: concurrency.max(1),
                timeout: Duration::from_secs_f64(timeout_secs),
                retry: RetryPolicy {
                    max_retries: retries,
                    initial_backoff_ms: backoff_ms,
                    multiplier: 2.0,
                },
                image_root,
                out,
            })
        }
        Command::Stats { bench, out } => stats::cmd_stats(&bench, &out),
        Command::ReportMerge {
            inputs,
            mode: MergeMode::Best,
            out,
        } => merge::cmd_report_merge(&inputs, &out),
    }
}
