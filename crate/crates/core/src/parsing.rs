//! Extraction of answers, boxes and selected indices from raw model text.
//!
//! Canonical grammars:
//!
//! - CSS: `<box style="left: Lpx; top: Tpx; width: Wpx; height: Hpx;"></box>`.
//!   Declarations may appear in any order; `x2`/`y2` may replace `width`/`height`.
//! - Absolute list: `[x1, y1, x2, y2]` with integer pixel coordinates.
//! - Relative list: `[x1, y1, x2, y2]` with decimals on `[0, scale]`.
//! - Index selection: comma-separated indices on the first line that carries an integer.
//!
//! Parsers never fail on arbitrary text. Anything that cannot be turned into a
//! valid box is counted in [`ParseDiagnostics`].

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;
use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{rel_to_abs, BBox, RelBox};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParseError {
    #[error("indices have no box serialization")]
    IndexSerialization,
    #[error("unknown response format `{0}` (expected css, abs, rel or index)")]
    UnknownFormat(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResponseFormat {
    CssAbsolute,
    ListAbsolute,
    ListRelative,
    IndexSelection,
}

impl ResponseFormat {
    pub const ALL: [ResponseFormat; 4] = [
        ResponseFormat::CssAbsolute,
        ResponseFormat::ListAbsolute,
        ResponseFormat::ListRelative,
        ResponseFormat::IndexSelection,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ResponseFormat::CssAbsolute => "css",
            ResponseFormat::ListAbsolute => "abs",
            ResponseFormat::ListRelative => "rel",
            ResponseFormat::IndexSelection => "index",
        }
    }

    pub fn yields_boxes(self) -> bool {
        self != ResponseFormat::IndexSelection
    }
}

impl fmt::Display for ResponseFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ResponseFormat {
    type Err = ParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "css" | "css_absolute" => Ok(ResponseFormat::CssAbsolute),
            "abs" | "list_absolute" => Ok(ResponseFormat::ListAbsolute),
            "rel" | "list_relative" => Ok(ResponseFormat::ListRelative),
            "index" | "index_selection" => Ok(ResponseFormat::IndexSelection),
            _ => Err(ParseError::UnknownFormat(s.to_string())),
        }
    }
}

/// What a response grounded its answer on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Grounding {
    Boxes(Vec<BBox>),
    Indices(Vec<usize>),
}

impl Grounding {
    pub fn is_empty(&self) -> bool {
        match self {
            Grounding::Boxes(b) => b.is_empty(),
            Grounding::Indices(i) => i.is_empty(),
        }
    }
}

/// Failure counters for one parse.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParseDiagnostics {
    /// Candidate blocks that did not match the grammar.
    pub skipped: usize,
    /// Groups that parsed but did not form a valid box.
    pub dropped: usize,
    /// Boxes whose coordinates were clamped to the image.
    pub clamped: usize,
    /// Boxes recovered by the format-agnostic fallback scan.
    pub fallback: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParsedResponse {
    pub answer_text: String,
    pub grounding: Grounding,
    pub diagnostics: ParseDiagnostics,
}

impl ParsedResponse {
    /// True iff at least one box or index was extracted.
    pub fn followed_instruction(&self) -> bool {
        !self.grounding.is_empty()
    }

    pub fn boxes(&self) -> Option<&[BBox]> {
        match &self.grounding {
            Grounding::Boxes(b) => Some(b),
            Grounding::Indices(_) => None,
        }
    }

    pub fn indices(&self) -> Option<&[usize]> {
        match &self.grounding {
            Grounding::Indices(i) => Some(i),
            Grounding::Boxes(_) => None,
        }
    }
}

/// Settings shared by every format-specific parser.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParseOptions {
    pub image_w: u32,
    pub image_h: u32,
    pub rel_scale: f64,
    pub fallback: bool,
    /// Largest admissible index for index selection.
    pub max_index: usize,
}

impl ParseOptions {
    pub fn new(image_w: u32, image_h: u32) -> Self {
        Self {
            image_w,
            image_h,
            rel_scale: 1.0,
            fallback: false,
            max_index: 0,
        }
    }
}

const NUM: &str = r"[-+]?(?:\d+(?:\.\d*)?|\.\d+)";

static STYLE_BLOCK: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r#"(?is)(?:<\w+[^<>]*?)?\bstyle\s*=\s*(?:"([^"]*)"|'([^']*)')(?:[^<>]*>)?(?:\s*</\w+\s*>)?"#).unwrap()
});
static CSS_DECL: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(&format!(r"(?i)^\s*([a-z0-9_-]+)\s*:\s*({NUM})\s*px\s*$")).unwrap());
static BRACKET_GROUP: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(&format!(r"\[\s*({NUM})\s*,\s*({NUM})\s*,\s*({NUM})\s*,\s*({NUM})\s*\]")).unwrap());
static ANY_BRACKET_GROUP: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(&format!(
        r"[\[\(\{{]\s*({NUM})[\s,]+({NUM})[\s,]+({NUM})[\s,]+({NUM})\s*[\]\)\}}]"
    ))
    .unwrap()
});
static INTEGER_TOKEN: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"[-+]?\d+(?:\.\d+)?").unwrap());

fn tidy(text: &str) -> String {
    text.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Clamps signed pixel coordinates into the image and validates the result.
fn clamp_box(c: [i64; 4], image_w: u32, image_h: u32, diag: &mut ParseDiagnostics) -> Option<BBox> {
    let cx = |v: i64| v.clamp(0, i64::from(image_w));
    let cy = |v: i64| v.clamp(0, i64::from(image_h));
    let clamped = [cx(c[0]), cy(c[1]), cx(c[2]), cy(c[3])];
    match BBox::from_signed(clamped[0], clamped[1], clamped[2], clamped[3]) {
        Ok(b) => {
            if clamped != c {
                diag.clamped += 1;
            }
            Some(b)
        }
        Err(_) => {
            diag.dropped += 1;
            None
        }
    }
}

fn parse_css_declarations(style: &str) -> Option<[f64; 4]> {
    let mut left = None;
    let mut top = None;
    let mut width = None;
    let mut height = None;
    let mut x2 = None;
    let mut y2 = None;
    for decl in style.split(';').filter(|d| !d.trim().is_empty()) {
        let Some(caps) = CSS_DECL.captures(decl) else {
            continue;
        };
        let value: f64 = caps[2].parse().ok()?;
        let slot = match caps[1].to_ascii_lowercase().as_str() {
            "left" | "x1" => &mut left,
            "top" | "y1" => &mut top,
            "width" => &mut width,
            "height" => &mut height,
            "x2" => &mut x2,
            "y2" => &mut y2,
            _ => continue,
        };
        *slot = Some(value);
    }
    let (l, t) = (left?, top?);
    let r = match (width, x2) {
        (Some(w), _) => l + w,
        (None, Some(x)) => x,
        _ => return None,
    };
    let b = match (height, y2) {
        (Some(h), _) => t + h,
        (None, Some(y)) => y,
        _ => return None,
    };
    Some([l, t, r, b])
}

fn round_coords(c: [f64; 4]) -> [i64; 4] {
    c.map(|v| v.round() as i64)
}

/// Parses CSS-style `<box style="...">` blocks.
pub fn parse_css(text: &str, image_w: u32, image_h: u32) -> ParsedResponse {
    let mut diag = ParseDiagnostics::default();
    let mut boxes = Vec::new();
    for caps in STYLE_BLOCK.captures_iter(text) {
        let style = caps.get(1).or_else(|| caps.get(2)).map_or("", |m| m.as_str());
        match parse_css_declarations(style) {
            Some(c) => boxes.extend(clamp_box(round_coords(c), image_w, image_h, &mut diag)),
            None => diag.skipped += 1,
        }
    }
    ParsedResponse {
        answer_text: tidy(&STYLE_BLOCK.replace_all(text, " ")),
        grounding: Grounding::Boxes(boxes),
        diagnostics: diag,
    }
}

fn group_values(caps: &regex::Captures<'_>) -> Option<[f64; 4]> {
    let mut out = [0.0; 4];
    for (i, slot) in out.iter_mut().enumerate() {
        *slot = caps[i + 1].parse().ok()?;
    }
    Some(out)
}

fn is_integer_literal(s: &str) -> bool {
    !s.contains('.')
}

/// Parses `[x1, y1, x2, y2]` groups of integer pixel coordinates.
pub fn parse_abs_list(text: &str, image_w: u32, image_h: u32) -> ParsedResponse {
    let mut diag = ParseDiagnostics::default();
    let mut boxes = Vec::new();
    for caps in BRACKET_GROUP.captures_iter(text) {
        let integral = (1..=4).all(|i| is_integer_literal(&caps[i]));
        match group_values(&caps) {
            Some(c) if integral => boxes.extend(clamp_box(round_coords(c), image_w, image_h, &mut diag)),
            _ => diag.skipped += 1,
        }
    }
    ParsedResponse {
        answer_text: tidy(&BRACKET_GROUP.replace_all(text, " ")),
        grounding: Grounding::Boxes(boxes),
        diagnostics: diag,
    }
}

fn rel_group_to_box(c: [f64; 4], image_w: u32, image_h: u32, scale: f64, diag: &mut ParseDiagnostics) -> Option<BBox> {
    let result = RelBox::new(c[0], c[1], c[2], c[3], scale).and_then(|r| rel_to_abs(&r, image_w, image_h));
    match result {
        Ok(b) => Some(b),
        Err(_) => {
            diag.dropped += 1;
            None
        }
    }
}

/// Parses `[x1, y1, x2, y2]` groups of relative coordinates on `[0, scale]`.
pub fn parse_rel_list(text: &str, image_w: u32, image_h: u32, scale: f64) -> ParsedResponse {
    let mut diag = ParseDiagnostics::default();
    let mut boxes = Vec::new();
    for caps in BRACKET_GROUP.captures_iter(text) {
        match group_values(&caps) {
            Some(c) => boxes.extend(rel_group_to_box(c, image_w, image_h, scale, &mut diag)),
            None => diag.skipped += 1,
        }
    }
    ParsedResponse {
        answer_text: tidy(&BRACKET_GROUP.replace_all(text, " ")),
        grounding: Grounding::Boxes(boxes),
        diagnostics: diag,
    }
}

/// Parses selected indices from the first line that carries an integer.
pub fn parse_indices(text: &str, max_index: usize) -> ParsedResponse {
    let mut lines = text.lines();
    let mut indices = Vec::new();
    let mut diag = ParseDiagnostics::default();
    let mut found_line = false;
    for line in lines.by_ref() {
        let tokens: Vec<&str> = INTEGER_TOKEN.find_iter(line).map(|m| m.as_str()).collect();
        let integers: Vec<&str> = tokens
            .iter()
            .copied()
            .filter(|t| is_integer_literal(t) && !t.starts_with('-'))
            .collect();
        if integers.is_empty() {
            continue;
        }
        found_line = true;
        let mut seen = HashSet::new();
        for tok in integers {
            match tok.trim_start_matches('+').parse::<usize>() {
                Ok(i) if i <= max_index => {
                    if seen.insert(i) {
                        indices.push(i);
                    }
                }
                _ => diag.dropped += 1,
            }
        }
        break;
    }
    let rest: Vec<&str> = if found_line {
        lines.collect()
    } else {
        text.lines().collect()
    };
    ParsedResponse {
        answer_text: rest.join("\n").trim().to_string(),
        grounding: Grounding::Indices(indices),
        diagnostics: diag,
    }
}

/// Format-agnostic scan for four numbers inside any bracket pair.
pub fn extract_fallback(text: &str) -> Vec<[f64; 4]> {
    ANY_BRACKET_GROUP
        .captures_iter(text)
        .filter_map(|caps| group_values(&caps))
        .collect()
}

/// Parses a response in the given format, falling back to the lenient scan
/// when enabled and the format-specific parser found no boxes.
pub fn parse_response(text: &str, format: ResponseFormat, opts: &ParseOptions) -> ParsedResponse {
    let mut parsed = match format {
        ResponseFormat::CssAbsolute => parse_css(text, opts.image_w, opts.image_h),
        ResponseFormat::ListAbsolute => parse_abs_list(text, opts.image_w, opts.image_h),
        ResponseFormat::ListRelative => parse_rel_list(text, opts.image_w, opts.image_h, opts.rel_scale),
        ResponseFormat::IndexSelection => return parse_indices(text, opts.max_index),
    };
    if opts.fallback && parsed.grounding.is_empty() {
        let mut diag = parsed.diagnostics;
        let boxes: Vec<BBox> = extract_fallback(text)
            .into_iter()
            .filter_map(|c| match format {
                ResponseFormat::ListRelative => {
                    rel_group_to_box(c, opts.image_w, opts.image_h, opts.rel_scale, &mut diag)
                }
                _ => clamp_box(round_coords(c), opts.image_w, opts.image_h, &mut diag),
            })
            .collect();
        diag.fallback = boxes.len();
        parsed.diagnostics = diag;
        parsed.grounding = Grounding::Boxes(boxes);
    }
    parsed
}

/// Shortest decimal that still pins a relative coordinate to its pixel.
fn format_relative(v: f64) -> String {
    let s = format!("{v:.6}");
    let s = s.trim_end_matches('0');
    let s = s.strip_suffix('.').unwrap_or(s);
    if s.is_empty() || s == "-" {
        "0".to_string()
    } else {
        s.to_string()
    }
}

/// Renders boxes in the canonical grammar of `format`, one per line.
pub fn serialize_boxes(
    boxes: &[BBox],
    format: ResponseFormat,
    image_w: u32,
    image_h: u32,
    scale: f64,
) -> Result<String, ParseError> {
    let render = |b: &BBox| -> String {
        match format {
            ResponseFormat::CssAbsolute => format!(
                r#"<box style="left: {}px; top: {}px; width: {}px; height: {}px;"></box>"#,
                b.x1(),
                b.y1(),
                b.width(),
                b.height()
            ),
            ResponseFormat::ListAbsolute => {
                format!("[{}, {}, {}, {}]", b.x1(), b.y1(), b.x2(), b.y2())
            }
            _ => {
                let rx = |v: u32| format_relative(f64::from(v) * scale / f64::from(image_w));
                let ry = |v: u32| format_relative(f64::from(v) * scale / f64::from(image_h));
                format!("[{}, {}, {}, {}]", rx(b.x1()), ry(b.y1()), rx(b.x2()), ry(b.y2()))
            }
        }
    };
    if format == ResponseFormat::IndexSelection {
        return Err(ParseError::IndexSerialization);
    }
    Ok(boxes.iter().map(render).collect::<Vec<_>>().join("\n"))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn b(x1: u32, y1: u32, x2: u32, y2: u32) -> BBox {
        BBox::new(x1, y1, x2, y2).unwrap()
    }

    #[test]
    fn css_single_block() {
        let p = parse_css(
            r#"Answer: high. <box style="left: 5px; top: 5px; width: 10px; height: 4px;">"#,
            100,
            100,
        );
        assert_eq!(p.answer_text, "Answer: high.");
        assert_eq!(p.boxes().unwrap(), &[b(5, 5, 15, 9)]);
        assert!(p.followed_instruction());
    }

    #[test]
    fn css_without_blocks() {
        let p = parse_css("It is high.", 100, 100);
        assert!(p.boxes().unwrap().is_empty());
        assert!(!p.followed_instruction());
        assert_eq!(p.answer_text, "It is high.");
    }

    #[test]
    fn css_reordered_keys_and_x2_variant() {
        let text = concat!(
            r#"<box style="left: 1px; top: 2px; width: 3px; height: 4px;"></box> and "#,
            r#"<box style='height:5px;width:6px;top:7px;left:8px'></box> "#,
            r#"<box style="left: 10px; top: 10px; x2: 20px; y2: 30px;"></box>"#
        );
        let p = parse_css(text, 100, 100);
        assert_eq!(p.boxes().unwrap(), &[b(1, 2, 4, 6), b(8, 7, 14, 12), b(10, 10, 20, 30)]);
        assert_eq!(p.answer_text, "and");
        let round = serialize_boxes(
            &[b(1, 2, 4, 6), b(8, 7, 14, 12)],
            ResponseFormat::CssAbsolute,
            100,
            100,
            1.0,
        )
        .unwrap();
        assert_eq!(
            parse_css(&round, 100, 100).boxes().unwrap(),
            &[b(1, 2, 4, 6), b(8, 7, 14, 12)]
        );
    }

    #[test]
    fn css_counts_unparseable_blocks() {
        let p = parse_css(r#"<box style="left: 5px; color: red;"></box>"#, 100, 100);
        assert!(p.boxes().unwrap().is_empty());
        assert_eq!(p.diagnostics.skipped, 1);
    }

    #[test]
    fn abs_list_examples() {
        let p = parse_abs_list("The value is 52. [10, 20, 110, 40]", 200, 200);
        assert_eq!(p.boxes().unwrap(), &[b(10, 20, 110, 40)]);
        assert_eq!(p.answer_text, "The value is 52.");

        let p = parse_abs_list("[0,0,0,0]", 200, 200);
        assert!(!p.followed_instruction());
        assert_eq!(p.diagnostics.dropped, 1);

        let p = parse_abs_list("[10,20,110,40] and [5,5,9,9]", 200, 200);
        assert_eq!(p.boxes().unwrap(), &[b(10, 20, 110, 40), b(5, 5, 9, 9)]);
    }

    #[test]
    fn abs_list_clamps_overshoot() {
        let p = parse_abs_list("[-3, 10, 105, 40]", 100, 100);
        assert_eq!(p.boxes().unwrap(), &[b(0, 10, 100, 40)]);
        assert_eq!(p.diagnostics.clamped, 1);
    }

    #[test]
    fn rel_list_examples() {
        let p = parse_rel_list("[0.1, 0.1, 0.5, 0.2]", 100, 100, 1.0);
        assert_eq!(p.boxes().unwrap(), &[b(10, 10, 50, 20)]);
        let p = parse_rel_list("[0.0,0.0,1.0,1.0]", 640, 480, 1.0);
        assert_eq!(p.boxes().unwrap(), &[b(0, 0, 640, 480)]);
        // 0.333*64 = 21.312 -> 21, 0.667*64 = 42.688 -> 43
        let p = parse_rel_list("[0.25,0.333,0.75,0.667]", 64, 64, 1.0);
        assert_eq!(p.boxes().unwrap(), &[b(16, 21, 48, 43)]);
    }

    #[test]
    fn rel_list_rejects_values_above_scale() {
        let p = parse_rel_list("[0.1, 0.1, 1.5, 0.2]", 100, 100, 1.0);
        assert!(!p.followed_instruction());
        assert_eq!(p.diagnostics.dropped, 1);
        let p = parse_rel_list("[100, 100, 500, 200]", 100, 100, 1000.0);
        assert_eq!(p.boxes().unwrap(), &[b(10, 10, 50, 20)]);
    }

    #[test]
    fn indices_examples() {
        let p = parse_indices("3, 7\nBecause those rows mention it.", 40);
        assert_eq!(p.indices().unwrap(), &[3, 7]);
        assert_eq!(p.answer_text, "Because those rows mention it.");

        let p = parse_indices("I cannot find any.", 40);
        assert!(p.indices().unwrap().is_empty());
        assert!(!p.followed_instruction());

        let p = parse_indices(" 12,12, 5 ", 40);
        assert_eq!(p.indices().unwrap(), &[12, 5]);
    }

    #[test]
    fn indices_skip_pleasantries_and_out_of_range() {
        let p = parse_indices("Sure! Here you go:\n\n4, 99, 2\nreason", 10);
        assert_eq!(p.indices().unwrap(), &[4, 2]);
        assert_eq!(p.diagnostics.dropped, 1);
        let p = parse_indices("-1, 3.5, 2", 10);
        assert_eq!(p.indices().unwrap(), &[2]);
        let p = parse_indices("Boxes 3, 7.", 10);
        assert_eq!(p.indices().unwrap(), &[3, 7]);
    }

    #[test]
    fn fallback_examples() {
        assert_eq!(extract_fallback("(10 20 30 40)"), vec![[10.0, 20.0, 30.0, 40.0]]);
        assert!(extract_fallback("coordinates: 1,2,3").is_empty());
        let got = extract_fallback("{0.1, 0.2, 0.3, 0.4}");
        assert_eq!(got, vec![[0.1, 0.2, 0.3, 0.4]]);
        // agrees with the relative parser on the bracketed form
        let direct = parse_rel_list("[0.1, 0.2, 0.3, 0.4]", 100, 100, 1.0);
        let via = rel_to_abs(
            &RelBox::new(got[0][0], got[0][1], got[0][2], got[0][3], 1.0).unwrap(),
            100,
            100,
        )
        .unwrap();
        assert_eq!(direct.boxes().unwrap(), &[via]);
    }

    #[test]
    fn fallback_only_when_enabled() {
        let mut opts = ParseOptions::new(100, 100);
        let text = "box at (10 20 30 40)";
        let strict = parse_response(text, ResponseFormat::ListAbsolute, &opts);
        assert!(!strict.followed_instruction());
        opts.fallback = true;
        let lenient = parse_response(text, ResponseFormat::ListAbsolute, &opts);
        assert_eq!(lenient.boxes().unwrap(), &[b(10, 20, 30, 40)]);
        assert_eq!(lenient.diagnostics.fallback, 1);
    }

    #[test]
    fn serialize_examples() {
        let s = serialize_boxes(&[b(5, 5, 15, 9)], ResponseFormat::CssAbsolute, 100, 100, 1.0).unwrap();
        assert_eq!(
            s,
            r#"<box style="left: 5px; top: 5px; width: 10px; height: 4px;"></box>"#
        );
        for f in [
            ResponseFormat::CssAbsolute,
            ResponseFormat::ListAbsolute,
            ResponseFormat::ListRelative,
        ] {
            assert_eq!(serialize_boxes(&[], f, 100, 100, 1.0).unwrap(), "");
        }
        assert_eq!(
            serialize_boxes(&[b(0, 0, 1, 1)], ResponseFormat::IndexSelection, 10, 10, 1.0),
            Err(ParseError::IndexSerialization)
        );
        let s = serialize_boxes(&[b(10, 10, 50, 20)], ResponseFormat::ListRelative, 100, 100, 1.0).unwrap();
        assert_eq!(s, "[0.1, 0.1, 0.5, 0.2]");
    }

    #[test]
    fn format_names_round_trip() {
        for f in ResponseFormat::ALL {
            assert_eq!(f.name().parse::<ResponseFormat>().unwrap(), f);
        }
        assert!("yaml".parse::<ResponseFormat>().is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn boxes_in(w: u32, h: u32) -> impl Strategy<Value = Vec<BBox>> {
            prop::collection::vec(
                (0..w - 1, 0..h - 1, 1u32..400, 1u32..400)
                    .prop_map(move |(x, y, bw, bh)| BBox::new(x, y, (x + bw).min(w), (y + bh).min(h)).unwrap()),
                0..6,
            )
        }

        proptest! {
            #[test]
            fn never_panics(text in ".{0,200}") {
                let opts = ParseOptions { fallback: true, max_index: 50, ..ParseOptions::new(100, 100) };
                for f in ResponseFormat::ALL {
                    let p = parse_response(&text, f, &opts);
                    prop_assert_eq!(p.followed_instruction(), !p.grounding.is_empty());
                }
            }

            #[test]
            fn indices_are_unique_and_bounded(text in "[0-9, a-z\n]{0,80}", max in 0usize..60) {
                let p = parse_indices(&text, max);
                let idx = p.indices().unwrap();
                let unique: HashSet<_> = idx.iter().collect();
                prop_assert_eq!(unique.len(), idx.len());
                prop_assert!(idx.iter().all(|&i| i <= max));
            }

            #[test]
            fn relative_round_trip_within_a_pixel(
                (w, h, boxes) in (2u32..3000, 2u32..3000).prop_flat_map(|(w, h)| (Just(w), Just(h), boxes_in(w, h))),
                scale in prop::sample::select(vec![1.0, 100.0, 1000.0]),
            ) {
                let text = serialize_boxes(&boxes, ResponseFormat::ListRelative, w, h, scale).unwrap();
                let parsed = parse_rel_list(&text, w, h, scale);
                let got = parsed.boxes().unwrap();
                prop_assert_eq!(got.len(), boxes.len());
                for (a, e) in got.iter().zip(&boxes) {
                    for (x, y) in a.coords().iter().zip(e.coords()) {
                        prop_assert!(x.abs_diff(y) <= 1);
                    }
                }
            }
        }
    }
}
