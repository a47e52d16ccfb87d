//! Evaluation and embedding-based grounding for question answering over
//! text-rich document images.
//!
//! * [`geometry`] — half-open pixel boxes, exact union areas, patch grids.
//! * [`parsing`] — model responses to boxes or OCR indices, and back.
//! * [`metrics`] — pixel/instance IoU, precision, recall, F1 and aggregation.
//! * [`engine`] — late-interaction scoring, contrastive loss, patch selection.
//! * [`pipeline`] — benchmark records, prompts, the construction loop, statistics.

pub mod engine;
pub mod geometry;
pub mod metrics;
pub mod parsing;
pub mod pipeline;

pub use geometry::{pixel_iou, region_areas, BBox, PatchGrid};
pub use metrics::{aggregate, EvalReport, SampleScore, Setting};
pub use parsing::{parse_response, ParseOptions, ResponseFormat};
pub use pipeline::Sample;
