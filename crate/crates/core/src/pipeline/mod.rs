//! Benchmark records and construction tooling.

pub mod benchmark;
pub mod construction;
pub mod ocr;
pub mod overlay;
pub mod prompts;
pub mod stats;

pub use benchmark::{
    load_benchmark, load_records, read_benchmark, read_records, save_benchmark, write_benchmark, BenchmarkError,
    ImageInfo, OcrBox, Records, Sample,
};
pub use construction::{run_construction_loop, ChatClient, ChatError, ChatRequest, LoopConfig, Verdict};
pub use ocr::{ingest_ocr, OcrQuad};
pub use overlay::emit_overlay;
pub use prompts::{build_generation_prompt, build_prompt, build_rectification_prompt};
pub use stats::{compute_stats, StatsTable};
