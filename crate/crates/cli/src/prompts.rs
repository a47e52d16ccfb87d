//! Writing evaluation prompts and overlays to disk.

use std::path::{Path, PathBuf};

use trig_core::metrics::Setting;
use trig_core::parsing::ResponseFormat;
use trig_core::pipeline::prompts::build_prompt_scaled;
use trig_core::pipeline::{emit_overlay, load_records, Records};

use crate::error::{CliError, CliResult, Outcome};
use crate::eval::check_setting_format;
use crate::report::write_text;

/// File name for a sample id, with anything unusual replaced by `_`.
pub fn file_stem(id: &str) -> String {
    id.chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.') {
                c
            } else {
                '_'
            }
        })
        .collect::<String>()
        .trim_start_matches('.')
        .to_string()
}

pub fn cmd_prompts(bench: &Path, setting: Setting, format: ResponseFormat, rel_scale: f64, out: &Path) -> CliResult {
    check_setting_format(setting, format)?;
    let samples = load_records(bench, Records::Candidates).map_err(|e| CliError::bench(bench, e))?;
    let mut skipped = 0;
    for s in &samples {
        match build_prompt_scaled(setting, s, format, rel_scale) {
            Ok(p) => write_text(&out.join(format!("{}.txt", file_stem(&s.id))), &p)?,
            Err(e) => {
                eprintln!("skipped {}: {e}", s.id);
                skipped += 1;
            }
        }
    }
    Ok(Outcome::from_skipped(skipped))
}

pub fn cmd_overlay(bench: &Path, out: &Path) -> CliResult {
    let samples = load_records(bench, Records::Candidates).map_err(|e| CliError::bench(bench, e))?;
    for s in &samples {
        let path: PathBuf = out.join(format!("{}.svg", file_stem(&s.id)));
        write_text(&path, &emit_overlay(s))?;
    }
    Ok(Outcome::Success)
}
