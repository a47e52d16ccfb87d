//! Prompt templates for evaluation and for benchmark construction.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::Sample;
use crate::metrics::Setting;
use crate::parsing::{serialize_boxes, ResponseFormat};

/// Bumped whenever any template text changes.
pub const TEMPLATE_VERSION: &str = "trig-prompts/1";

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PromptError {
    #[error("setting 2 needs OCR text but every OCR box of `{0}` is empty")]
    MissingOcrText(String),
    #[error("sample `{0}` has no OCR boxes to select from")]
    NoOcrBoxes(String),
    #[error("rectification needs at least one candidate index")]
    NoCandidates,
}

/// A system/user message pair for a chat-completion endpoint.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatPrompt {
    pub system: String,
    pub user: String,
}

const EVAL_BOX_INSTRUCTION: &str = "Answer the question based on the document image. \
Then provide the bounding boxes of the image regions that support your answer.";

const EVAL_SELECT_INSTRUCTION: &str = "Answer the question based on the document image. \
Select the bounding boxes from the list above that support your answer.";

const EVAL_SELECT_FORMAT: &str = "Output the indexes of the selected bounding boxes in the first line, \
separated by commas, and nothing else in that line. Then give the answer in the following lines.";

fn box_format_requirement(format: ResponseFormat, w: u32, h: u32, scale: f64) -> String {
    match format {
        ResponseFormat::CssAbsolute => format!(
            "The image is {w}x{h} pixels. Write each bounding box as an HTML element in CSS pixel format, \
for example <box style=\"left: 10px; top: 20px; width: 100px; height: 30px;\"></box>, \
where left and top locate the top-left corner. Give the answer first, then the boxes."
        ),
        ResponseFormat::ListAbsolute | ResponseFormat::IndexSelection => format!(
            "The image is {w}x{h} pixels. Write each bounding box as [x1, y1, x2, y2] in pixels, \
where (x1, y1) is the top-left corner and (x2, y2) the bottom-right corner. \
Give the answer first, then the boxes."
        ),
        ResponseFormat::ListRelative => format!(
            "Write each bounding box as [x1, y1, x2, y2] in coordinates relative to the image size, \
from 0 to {scale}, where (x1, y1) is the top-left corner and (x2, y2) the bottom-right corner. \
Give the answer first, then the boxes."
        ),
    }
}

fn render_coords(sample: &Sample, i: usize, format: ResponseFormat, scale: f64) -> String {
    let fmt = if format == ResponseFormat::IndexSelection {
        ResponseFormat::ListAbsolute
    } else {
        format
    };
    serialize_boxes(
        &[sample.ocr[i].bbox],
        fmt,
        sample.image.width,
        sample.image.height,
        scale,
    )
    .expect("box formats serialize")
}

/// Evaluation prompt for one sample; `rel_scale` only matters for relative coordinates.
pub fn build_prompt_scaled(
    setting: Setting,
    sample: &Sample,
    format: ResponseFormat,
    rel_scale: f64,
) -> Result<String, PromptError> {
    let mut out = format!("Question: {}\n", sample.question);
    if setting == Setting::OcrFree {
        let req = box_format_requirement(format, sample.image.width, sample.image.height, rel_scale);
        let _ = write!(out, "{EVAL_BOX_INSTRUCTION}\n{req}\n");
        return Ok(out);
    }
    if sample.ocr.is_empty() {
        return Err(PromptError::NoOcrBoxes(sample.id.clone()));
    }
    let with_text = setting == Setting::OcrBased;
    if with_text && sample.ocr.iter().all(|o| o.text.trim().is_empty()) {
        return Err(PromptError::MissingOcrText(sample.id.clone()));
    }
    out.push_str(if with_text {
        "The OCR bounding boxes of the image are listed below, each with its index, coordinates and text:\n"
    } else {
        "The OCR bounding boxes of the image are listed below, each with its index and coordinates:\n"
    });
    for (i, o) in sample.ocr.iter().enumerate() {
        let coords = render_coords(sample, i, format, rel_scale);
        if with_text {
            let _ = writeln!(out, "[{}] {} {}", o.index, coords, o.text.trim());
        } else {
            let _ = writeln!(out, "[{}] {}", o.index, coords);
        }
    }
    let _ = write!(out, "{EVAL_SELECT_INSTRUCTION}\n{EVAL_SELECT_FORMAT}\n");
    Ok(out)
}

pub fn build_prompt(setting: Setting, sample: &Sample, format: ResponseFormat) -> Result<String, PromptError> {
    build_prompt_scaled(setting, sample, format, 1.0)
}

const GENERATION_SYSTEM: &str = "You are a helpful and precise assistant in finding the grounding bounding boxes given the question-answer pair and the poster image.";

const RECTIFICATION_SYSTEM: &str = "You are a helpful and precise assistant in analyzing the grounding bounding boxes given the question-answer pair and the poster image.";

const CONTEXT_HEADER: &str = "Above is the question and answer for a given poster.\n\
Sentence-level bounding boxes with indexes are provided in the poster, and detailed indexes with corresponding texts are also provided below:";

/// Instruction sentence asking for comma-separated indexes.
pub const GENERATION_INDEX_INSTRUCTION: &str = "Please provide the index in the first line, use a comma to separate different indexes if more than one, and do not output anything else except for indexes or commas.";

pub const RECTIFICATION_VERDICT_INSTRUCTION: &str =
    "Please output YES or NO in the first line, then provide the reason in the following lines.";

fn qa_context(sample: &Sample) -> String {
    let mut out = format!(
        "Question: {}\nAnswer: {}\n{CONTEXT_HEADER}\n",
        sample.question, sample.answer
    );
    for o in &sample.ocr {
        let _ = writeln!(out, "[{}] {}", o.index, o.text.trim());
    }
    out
}

pub fn build_generation_prompt(sample: &Sample) -> ChatPrompt {
    let mut user = qa_context(sample);
    user.push_str("Can you provide me with the indexes of bounding boxes that can accurately and sufficiently lead to the answer? Make sure you check both the poster image and the text provided above.\n");
    user.push_str(GENERATION_INDEX_INSTRUCTION);
    user.push('\n');
    user.push_str("Please then provide the reason in the following lines on why you choose those bounding boxes.");
    ChatPrompt {
        system: GENERATION_SYSTEM.to_string(),
        user,
    }
}

pub fn format_index_list(indices: &[usize]) -> String {
    indices.iter().map(usize::to_string).collect::<Vec<_>>().join(", ")
}

pub fn build_rectification_prompt(sample: &Sample, candidates: &[usize]) -> Result<ChatPrompt, PromptError> {
    if candidates.is_empty() {
        return Err(PromptError::NoCandidates);
    }
    let mut user = qa_context(sample);
    let _ = write!(
        user,
        "Do you think the bounding boxes with index {} can accurately and sufficiently lead to the answer to the given question?\n{RECTIFICATION_VERDICT_INSTRUCTION}",
        format_index_list(candidates)
    );
    Ok(ChatPrompt {
        system: RECTIFICATION_SYSTEM.to_string(),
        user,
    })
}

/// Appends a rejected selection and the judge's reasoning to a generation prompt.
pub fn with_feedback(mut prompt: ChatPrompt, rejected: &[usize], reason: &str) -> ChatPrompt {
    let _ = write!(
        prompt.user,
        "\n\nA previous answer selected the bounding boxes with index {} and was judged insufficient for the following reason:\n{}\nPlease take this into account.",
        format_index_list(rejected),
        reason.trim()
    );
    prompt
}
